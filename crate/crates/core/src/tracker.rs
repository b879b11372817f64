//! Temporal association of per-frame segment observations into tracks.
//! Tracks that go unobserved for longer than `tau` seconds are finalized
//! into primitives.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::model::{bbox_iou, merge_embedding, Aabb3, EmbeddingVector, Primitive};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentObservation {
    pub frame: u64,
    pub stamp: f64,
    pub embedding: EmbeddingVector,
    pub bbox: Aabb3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: u64,
    pub observations: Vec<SegmentObservation>,
    pub last_stamp: f64,
    /// Re-normalized mean of the observation embeddings.
    pub embedding: EmbeddingVector,
    pub bbox: Aabb3,
    embedding_sum: Vec<f64>,
}

impl Track {
    pub fn new(id: u64, obs: SegmentObservation) -> Self {
        Self {
            id,
            last_stamp: obs.stamp,
            embedding: obs.embedding.clone(),
            bbox: obs.bbox,
            embedding_sum: obs.embedding.as_slice().to_vec(),
            observations: vec![obs],
        }
    }

    fn push(&mut self, obs: SegmentObservation) {
        self.last_stamp = self.last_stamp.max(obs.stamp);
        self.bbox = self.bbox.hull(&obs.bbox);
        for (acc, v) in self.embedding_sum.iter_mut().zip(obs.embedding.as_slice()) {
            *acc += v;
        }
        // an exactly cancelling sum keeps the previous gating embedding
        if let Ok(e) = EmbeddingVector::new(self.embedding_sum.clone()) {
            self.embedding = e;
        }
        self.observations.push(obs);
    }

    /// Primitive with the averaged embedding and the hull of all boxes.
    pub fn to_primitive(&self) -> Result<Primitive> {
        let weighted: Vec<_> = self
            .observations
            .iter()
            .map(|o| (&o.embedding, 1.0))
            .collect();
        Ok(Primitive {
            id: self.id,
            embedding: merge_embedding(&weighted)?,
            bbox: self.bbox,
            stamp: Some(self.last_stamp),
            support: self.observations.len() as u32,
        })
    }
}

/// Outcome of associating one observation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Association {
    Existing(u64),
    New,
}

/// Candidate tracks pass both the cosine gate and the IoU gate; the one with
/// the highest IoU wins, ties to the lowest track id.
pub fn associate(
    tracks: &[Track],
    obs: &SegmentObservation,
    theta_track: f64,
    gamma: f64,
) -> Association {
    let mut best: Option<(f64, u64)> = None;
    for t in tracks {
        if t.embedding.dim() != obs.embedding.dim() {
            continue;
        }
        let cos = t.embedding.dot_unchecked(&obs.embedding);
        if cos < theta_track {
            continue;
        }
        let iou = bbox_iou(&t.bbox, &obs.bbox);
        if iou < gamma {
            continue;
        }
        let better = match best {
            None => true,
            Some((bi, bid)) => iou > bi || (iou == bi && t.id < bid),
        };
        if better {
            best = Some((iou, t.id));
        }
    }
    best.map_or(Association::New, |(_, id)| Association::Existing(id))
}

/// Splits off tracks idle for more than `tau` seconds at time `now` and
/// turns them into primitives, in track id order.
pub fn expire(tracks: Vec<Track>, now: f64, tau: f64) -> Result<(Vec<Track>, Vec<Primitive>)> {
    let (done, active): (Vec<Track>, Vec<Track>) =
        tracks.into_iter().partition(|t| now - t.last_stamp > tau);
    let mut finished = done
        .iter()
        .map(Track::to_primitive)
        .collect::<Result<Vec<_>>>()?;
    finished.sort_by_key(|p| p.id);
    Ok((active, finished))
}

/// Stateful tracker around [`associate`] and [`expire`].
#[derive(Debug, Clone)]
pub struct Tracker {
    theta_track: f64,
    gamma: f64,
    tau: f64,
    tracks: Vec<Track>,
    next_id: u64,
}

impl Tracker {
    pub fn new(theta_track: f64, gamma: f64, tau: f64) -> Self {
        Self {
            theta_track,
            gamma,
            tau,
            tracks: Vec::new(),
            next_id: 0,
        }
    }

    /// Track ids start at `first_id`.
    pub fn with_first_id(mut self, first_id: u64) -> Self {
        self.next_id = first_id;
        self
    }

    pub fn active(&self) -> &[Track] {
        &self.tracks
    }

    /// Associates an observation and returns the id of the track it joined.
    pub fn observe(&mut self, obs: SegmentObservation) -> u64 {
        match associate(&self.tracks, &obs, self.theta_track, self.gamma) {
            Association::Existing(id) => {
                let t = self
                    .tracks
                    .iter_mut()
                    .find(|t| t.id == id)
                    .expect("associated track is active");
                t.push(obs);
                id
            }
            Association::New => {
                let id = self.next_id;
                self.next_id += 1;
                self.tracks.push(Track::new(id, obs));
                id
            }
        }
    }

    /// Finalizes tracks idle for more than `tau` at `now`.
    pub fn expire(&mut self, now: f64) -> Result<Vec<Primitive>> {
        let (active, finished) = expire(std::mem::take(&mut self.tracks), now, self.tau)?;
        self.tracks = active;
        Ok(finished)
    }

    /// Finalizes every remaining track.
    pub fn flush(&mut self) -> Result<Vec<Primitive>> {
        self.expire(f64::INFINITY)
    }
}
