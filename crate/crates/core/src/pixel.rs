//! Pixel types that can be averaged channel by channel.

use crate::raster::Rgb;

pub trait Blend: Copy + PartialEq + Send + Sync {
    const CHANNELS: usize;
    fn channel(&self, k: usize) -> f64;
    /// Rebuild a pixel from per-channel values; integer types round and clamp.
    fn from_channels(ch: &[f64]) -> Self;
}

impl Blend for f64 {
    const CHANNELS: usize = 1;
    #[inline]
    fn channel(&self, _: usize) -> f64 {
        *self
    }
    #[inline]
    fn from_channels(ch: &[f64]) -> Self {
        ch[0]
    }
}

#[inline]
fn to_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

impl Blend for u8 {
    const CHANNELS: usize = 1;
    #[inline]
    fn channel(&self, _: usize) -> f64 {
        *self as f64
    }
    #[inline]
    fn from_channels(ch: &[f64]) -> Self {
        to_u8(ch[0])
    }
}

impl Blend for Rgb {
    const CHANNELS: usize = 3;
    #[inline]
    fn channel(&self, k: usize) -> f64 {
        self[k] as f64
    }
    #[inline]
    fn from_channels(ch: &[f64]) -> Self {
        [to_u8(ch[0]), to_u8(ch[1]), to_u8(ch[2])]
    }
}
