//! Geometry shared by the FP32 and INT8 convolution kernels.
//!
//! Inputs are copied into a zero-padded plane of width `wp = w + 2*pad`. An
//! output plane is then computed in "wide" form: row stride `wp`, of which only
//! the first `ow` columns are meaningful. With that layout, a single kernel tap
//! `(ky, kx)` is one contiguous multiply-accumulate of length `span` between the
//! wide output and the padded input shifted by `ky * wp + kx`.

use crate::layers::LayerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvGeom {
    pub in_ch: usize,
    pub out_ch: usize,
    pub h: usize,
    pub w: usize,
    pub k: usize,
    pub pad: usize,
    pub hp: usize,
    pub wp: usize,
    pub oh: usize,
    pub ow: usize,
    /// Length of one tap's contiguous run in wide layout.
    pub span: usize,
}

impl ConvGeom {
    pub fn new(layer: &LayerKind, input: &[usize]) -> Option<Self> {
        let LayerKind::Conv2d { in_ch, out_ch, kernel, pad } = *layer else {
            return None;
        };
        let (h, w) = (input[1], input[2]);
        let (hp, wp) = (h + 2 * pad, w + 2 * pad);
        let (oh, ow) = (hp + 1 - kernel, wp + 1 - kernel);
        Some(ConvGeom {
            in_ch,
            out_ch,
            h,
            w,
            k: kernel,
            pad,
            hp,
            wp,
            oh,
            ow,
            span: (oh - 1) * wp + ow,
        })
    }

    pub fn in_plane(&self) -> usize {
        self.h * self.w
    }

    pub fn out_plane(&self) -> usize {
        self.oh * self.ow
    }

    pub fn padded_plane(&self) -> usize {
        self.hp * self.wp
    }

    pub fn taps(&self) -> usize {
        self.k * self.k
    }

    /// Copies `in_ch` planes into zero-padded planes.
    pub fn pad_into<S: Copy, T: Copy + Default>(
        &self,
        planes: &[S],
        padded: &mut [T],
        conv: impl Fn(S) -> T,
    ) {
        padded.fill(T::default());
        for c in 0..self.in_ch {
            let src = &planes[c * self.in_plane()..(c + 1) * self.in_plane()];
            let dst = &mut padded[c * self.padded_plane()..(c + 1) * self.padded_plane()];
            for y in 0..self.h {
                let row = &src[y * self.w..(y + 1) * self.w];
                let start = (y + self.pad) * self.wp + self.pad;
                for (d, &s) in dst[start..start + self.w].iter_mut().zip(row) {
                    *d = conv(s);
                }
            }
        }
    }

    /// Extracts the valid `oh x ow` region from a wide plane.
    pub fn compact<T: Copy>(&self, wide: &[T], out: &mut [T]) {
        for y in 0..self.oh {
            out[y * self.ow..(y + 1) * self.ow]
                .copy_from_slice(&wide[y * self.wp..y * self.wp + self.ow]);
        }
    }

    /// Spreads a compact `oh x ow` plane into wide form, zeroing the gap columns.
    pub fn widen<T: Copy + Default>(&self, plane: &[T], wide: &mut [T]) {
        wide.fill(T::default());
        for y in 0..self.oh {
            wide[y * self.wp..y * self.wp + self.ow]
                .copy_from_slice(&plane[y * self.ow..(y + 1) * self.ow]);
        }
    }

    /// Extracts the unpadded `h x w` interior of a padded plane.
    pub fn crop<T: Copy>(&self, padded: &[T], out: &mut [T]) {
        for y in 0..self.h {
            let start = (y + self.pad) * self.wp + self.pad;
            out[y * self.w..(y + 1) * self.w].copy_from_slice(&padded[start..start + self.w]);
        }
    }
}
