use crate::skeleton::SkeletonSequence;
use crate::{Error, Result};

/// Frame range `[start, end)` of one analysis window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub start: usize,
    pub end: usize,
    pub duration_s: f64,
    pub overlap_s: f64,
}

impl Window {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }

    pub fn apply(&self, seq: &SkeletonSequence) -> Result<SkeletonSequence> {
        seq.slice_frames(self.start, self.end)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Windowing {
    pub windows: Vec<Window>,
    /// Set when the sequence is shorter than one window.
    pub too_short: bool,
}

// Durations like 5 s * 30 Hz should land on exact frame counts.
fn to_frames(seconds: f64, frame_rate: f64) -> usize {
    (seconds * frame_rate + 1e-9).floor() as usize
}

/// Fixed-length windows advancing by `duration_s - overlap_s`; the trailing
/// partial window is dropped.
pub fn windowize(seq: &SkeletonSequence, duration_s: f64, overlap_s: f64) -> Result<Windowing> {
    if !(overlap_s >= 0.0 && duration_s > overlap_s) {
        return Err(Error::Config(format!("window duration {duration_s}s must exceed overlap {overlap_s}s >= 0")));
    }
    let fr = seq.frame_rate();
    let width = to_frames(duration_s, fr);
    let stride = to_frames(duration_s - overlap_s, fr);
    if width == 0 || stride == 0 {
        return Err(Error::Config(format!(
            "window of {duration_s}s (overlap {overlap_s}s) is shorter than one frame at {fr} Hz"
        )));
    }
    let frames = seq.frames();
    if frames < width {
        return Ok(Windowing { windows: Vec::new(), too_short: true });
    }
    let windows = (0..=(frames - width) / stride)
        .map(|i| Window { start: i * stride, end: i * stride + width, duration_s, overlap_s })
        .collect();
    Ok(Windowing { windows, too_short: false })
}
