//! Observation tensors: stacked grayscale frames with 8-bit pixels.
//!
//! A [`FrameState`] is the object being perturbed. Pixels are stored as
//! `u8`; perturbation arithmetic happens in `i32` and is clamped back
//! into `[0, 255]` so wraparound cannot occur. Channels are stacked
//! newest-last; this ordering is part of the policy weight-file contract.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PIXEL_MAX: u8 = 255;

/// Height x width x channels of an observation stack.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StateShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

impl StateShape {
    pub fn new(height: usize, width: usize, channels: usize) -> Result<Self> {
        if height == 0 || width == 0 || channels == 0 {
            return Err(Error::Shape(format!(
                "all dimensions must be positive, got {height}x{width}x{channels}"
            )));
        }
        Ok(Self {
            height,
            width,
            channels,
        })
    }

    pub fn pixel_count(&self) -> usize {
        self.height * self.width * self.channels
    }
}

/// Stack of grayscale frames consumed by a policy, newest channel last.
///
/// Immutable after construction; `push_frame` returns a new value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrameState {
    shape: StateShape,
    // layout: (row * width + col) * channels + channel
    pixels: Vec<u8>,
}

impl FrameState {
    /// All-zero state of the given shape.
    pub fn zeros(shape: StateShape) -> Self {
        Self {
            pixels: vec![0; shape.pixel_count()],
            shape,
        }
    }

    /// Builds a state from raw pixel data in `[row][col][channel]` order.
    pub fn from_pixels(shape: StateShape, pixels: Vec<u8>) -> Result<Self> {
        if pixels.len() != shape.pixel_count() {
            return Err(Error::Shape(format!(
                "expected {} pixels for shape {}x{}x{}, got {}",
                shape.pixel_count(),
                shape.height,
                shape.width,
                shape.channels,
                pixels.len()
            )));
        }
        Ok(Self { shape, pixels })
    }

    pub fn shape(&self) -> StateShape {
        self.shape
    }

    fn check_bounds(&self, x: usize, y: usize, c: usize) -> Result<()> {
        if x >= self.shape.height {
            return Err(Error::Bounds {
                axis: "height",
                index: x,
                size: self.shape.height,
            });
        }
        if y >= self.shape.width {
            return Err(Error::Bounds {
                axis: "width",
                index: y,
                size: self.shape.width,
            });
        }
        if c >= self.shape.channels {
            return Err(Error::Bounds {
                axis: "channel",
                index: c,
                size: self.shape.channels,
            });
        }
        Ok(())
    }

    pub fn get_pixel(&self, x: usize, y: usize, c: usize) -> Result<u8> {
        self.check_bounds(x, y, c)?;
        Ok(self.pixels[(x * self.shape.width + y) * self.shape.channels + c])
    }

    /// Internal unchecked accessor for hot loops; callers guarantee bounds.
    pub(crate) fn pixel_unchecked(&self, x: usize, y: usize, c: usize) -> u8 {
        self.pixels[(x * self.shape.width + y) * self.shape.channels + c]
    }

    pub(crate) fn set_pixel_unchecked(&mut self, x: usize, y: usize, c: usize, v: u8) {
        self.pixels[(x * self.shape.width + y) * self.shape.channels + c] = v;
    }

    /// Drops the oldest channel and appends `frame` as the newest.
    ///
    /// `frame` is a row-major `height x width` image; every value must be a
    /// valid pixel already (`Frame2d` enforces the domain at construction).
    pub fn push_frame(&self, frame: &Frame2d) -> Result<FrameState> {
        if frame.height != self.shape.height || frame.width != self.shape.width {
            return Err(Error::Shape(format!(
                "frame is {}x{}, state expects {}x{}",
                frame.height, frame.width, self.shape.height, self.shape.width
            )));
        }
        let mut out = self.clone();
        let ch = self.shape.channels;
        for x in 0..self.shape.height {
            for y in 0..self.shape.width {
                let base = (x * self.shape.width + y) * ch;
                for c in 0..ch - 1 {
                    out.pixels[base + c] = self.pixels[base + c + 1];
                }
                out.pixels[base + ch - 1] = frame.get(x, y);
            }
        }
        Ok(out)
    }
}

/// A single 2-D grayscale frame as produced by an environment renderer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame2d {
    pub height: usize,
    pub width: usize,
    data: Vec<u8>,
}

impl Frame2d {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            data: vec![0; height * width],
        }
    }

    /// Builds a frame from wider integers, rejecting out-of-domain values.
    pub fn from_values(height: usize, width: usize, values: &[i64]) -> Result<Self> {
        if values.len() != height * width {
            return Err(Error::Shape(format!(
                "expected {} values for {}x{} frame, got {}",
                height * width,
                height,
                width,
                values.len()
            )));
        }
        let mut data = Vec::with_capacity(values.len());
        for &v in values {
            if !(0..=PIXEL_MAX as i64).contains(&v) {
                return Err(Error::Domain { value: v });
            }
            data.push(v as u8);
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn from_bytes(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::Shape(format!(
                "expected {} bytes for {}x{} frame, got {}",
                height * width,
                height,
                width,
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.data[x * self.width + y]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        self.data[x * self.width + y] = v;
    }

    pub fn bytes(&self) -> &[u8] {
        &self.data
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(h: usize, w: usize, c: usize) -> StateShape {
        StateShape::new(h, w, c).unwrap()
    }

    #[test]
    fn zero_state_reads_zero() {
        let s = FrameState::zeros(shape(84, 84, 4));
        assert_eq!(s.get_pixel(0, 0, 0).unwrap(), 0);
    }

    #[test]
    fn write_then_read() {
        let mut s = FrameState::zeros(shape(84, 84, 4));
        s.set_pixel_unchecked(3, 7, 1, 200);
        assert_eq!(s.get_pixel(3, 7, 1).unwrap(), 200);
    }

    #[test]
    fn out_of_bounds_names_axis() {
        let s = FrameState::zeros(shape(84, 84, 4));
        match s.get_pixel(84, 0, 0) {
            Err(Error::Bounds { axis, .. }) => assert_eq!(axis, "height"),
            other => panic!("expected bounds error, got {other:?}"),
        }
    }

    #[test]
    fn push_frame_queue_semantics() {
        // stack [A,B,C,D], push E -> [B,C,D,E]
        let sh = shape(2, 2, 4);
        let mut s = FrameState::zeros(sh);
        for (c, v) in [10u8, 20, 30, 40].iter().enumerate() {
            for x in 0..2 {
                for y in 0..2 {
                    s.set_pixel_unchecked(x, y, c, *v);
                }
            }
        }
        let e = Frame2d::from_values(2, 2, &[50, 50, 50, 50]).unwrap();
        let s2 = s.push_frame(&e).unwrap();
        for (c, v) in [20u8, 30, 40, 50].iter().enumerate() {
            assert_eq!(s2.get_pixel(1, 1, c).unwrap(), *v);
        }
        // input untouched
        assert_eq!(s.get_pixel(0, 0, 0).unwrap(), 10);
    }

    #[test]
    fn frame_rejects_out_of_range() {
        assert!(matches!(
            Frame2d::from_values(1, 1, &[256]),
            Err(Error::Domain { value: 256 })
        ));
    }

    #[test]
    fn push_onto_fresh_stack() {
        let s = FrameState::zeros(shape(2, 2, 4));
        let f = Frame2d::from_values(2, 2, &[1, 2, 3, 4]).unwrap();
        let s2 = s.push_frame(&f).unwrap();
        assert_eq!(s2.get_pixel(0, 1, 3).unwrap(), 2);
        assert_eq!(s2.get_pixel(0, 1, 2).unwrap(), 0);
    }

    #[test]
    fn push_shape_mismatch() {
        let s = FrameState::zeros(shape(2, 2, 4));
        let f = Frame2d::zeros(3, 2);
        assert!(matches!(s.push_frame(&f), Err(Error::Shape(_))));
    }

    #[test]
    fn full_replacement_property() {
        // pushing `channels` frames F1..Fk yields exactly [F1..Fk] in order
        let sh = shape(3, 3, 4);
        let mut s = FrameState::zeros(sh);
        let mut frames = Vec::new();
        for k in 0..4u8 {
            let mut f = Frame2d::zeros(3, 3);
            for x in 0..3 {
                for y in 0..3 {
                    f.set(x, y, k * 50 + (x * 3 + y) as u8);
                }
            }
            frames.push(f);
        }
        for f in &frames {
            s = s.push_frame(f).unwrap();
        }
        for (c, f) in frames.iter().enumerate() {
            for x in 0..3 {
                for y in 0..3 {
                    assert_eq!(s.get_pixel(x, y, c).unwrap(), f.get(x, y));
                }
            }
        }
    }
}
