//! Serde structs for the JSON shapes shared by annotation files, canonical
//! prediction files, and transcript-segment payloads.
//!
//! Conversion functions return plain string messages; callers wrap them
//! with file/line or dialect context.

use crate::model::{BoundingBox, TemporalSupport, Tube};
use crate::plot::{TimedBox, TranscriptSegment};
use serde::{Deserialize, Serialize};

/// A box tube as stored on disk: parallel timestamp and box arrays.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct WireTube {
    /// Whole seconds (1 Hz sampling); stored as JSON numbers.
    pub timestamps: Vec<f64>,
    /// Boxes as `[x0, y0, x1, y1]` in normalised `[0, 1]` coordinates.
    pub boxes: Vec<[f64; 4]>,
}

/// A timestamped box inside a transcript segment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct WireTimedBox {
    pub timestamp: f64,
    pub box_2d: [f64; 4],
}

/// A transcript segment with an optional box track.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub(crate) struct WireSegment {
    pub text: String,
    pub start: f64,
    pub end: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub boxes: Vec<WireTimedBox>,
}

impl WireTube {
    /// Strict conversion for trusted files: timestamps must be non-negative
    /// whole seconds and boxes must already be valid.
    pub fn into_tube(self) -> Result<Tube, String> {
        if self.timestamps.len() != self.boxes.len() {
            return Err(format!(
                "tube has {} timestamps but {} boxes",
                self.timestamps.len(),
                self.boxes.len()
            ));
        }
        let mut seconds = Vec::with_capacity(self.timestamps.len());
        for &t in &self.timestamps {
            if !t.is_finite() || t < 0.0 || t.fract() != 0.0 {
                return Err(format!(
                    "tube timestamp {t} is not a non-negative whole second (1 Hz sampling)"
                ));
            }
            seconds.push(t as u32);
        }
        let mut boxes = Vec::with_capacity(self.boxes.len());
        for [x0, y0, x1, y1] in self.boxes {
            boxes.push(BoundingBox::new(x0, y0, x1, y1).map_err(|e| e.to_string())?);
        }
        // Reorder boxes to follow the sorted support.
        let mut order: Vec<usize> = (0..seconds.len()).collect();
        order.sort_by_key(|&i| seconds[i]);
        for pair in order.windows(2) {
            if seconds[pair[0]] == seconds[pair[1]] {
                return Err(format!("tube repeats timestamp {}", seconds[pair[0]]));
            }
        }
        let boxes = order.iter().map(|&i| boxes[i]).collect();
        let support = TemporalSupport::from_seconds(seconds);
        Tube::new(support, boxes).map_err(|e| e.to_string())
    }

    pub fn from_tube(tube: &Tube) -> Self {
        Self {
            timestamps: tube.support().iter().map(f64::from).collect(),
            boxes: tube.boxes().iter().map(BoundingBox::corners).collect(),
        }
    }
}

impl WireSegment {
    /// Strict conversion for trusted files: boxes must be valid and fall
    /// within the segment's tolerance window.
    pub fn into_segment(self) -> Result<TranscriptSegment, String> {
        let mut boxes = Vec::with_capacity(self.boxes.len());
        for wb in self.boxes {
            let [x0, y0, x1, y1] = wb.box_2d;
            boxes.push(TimedBox {
                timestamp_s: wb.timestamp,
                bbox: BoundingBox::new(x0, y0, x1, y1).map_err(|e| e.to_string())?,
            });
        }
        TranscriptSegment::new(self.start, self.end, self.text, boxes).map_err(|e| e.to_string())
    }

    pub fn from_segment(segment: &TranscriptSegment) -> Self {
        Self {
            text: segment.text().to_string(),
            start: segment.start_s(),
            end: segment.end_s(),
            boxes: segment
                .boxes()
                .iter()
                .map(|tb| WireTimedBox {
                    timestamp: tb.timestamp_s,
                    box_2d: tb.bbox.corners(),
                })
                .collect(),
        }
    }
}
