//! Tiling of aligned image/mask pairs into fixed-size patches and lossless
//! reassembly. With `stride == size` the tiles partition the pixel grid
//! exactly; with smaller strides the trailing tile is clamped so the full
//! image is always covered.

use ndarray::{Array2, Array3};

use crate::error::{CoreError, Result};
use crate::image_array::ImageArray;
use crate::mask::SemanticMask;

/// One tile with the offset of its top-left corner in the source image.
#[derive(Debug, Clone)]
pub struct Tile {
    pub image: ImageArray,
    pub mask: SemanticMask,
    pub offset: (usize, usize),
}

fn axis_offsets(len: usize, size: usize, stride: usize) -> Vec<usize> {
    let mut offs = Vec::new();
    let mut pos = 0;
    loop {
        if pos + size >= len {
            offs.push(len - size);
            break;
        }
        offs.push(pos);
        pos += stride;
    }
    offs
}

/// Cuts an aligned pair into `size`x`size` tiles stepped by `stride`.
pub fn tile(
    image: &ImageArray,
    mask: &SemanticMask,
    size: usize,
    stride: usize,
) -> Result<Vec<Tile>> {
    if size == 0 || stride == 0 {
        return Err(CoreError::TileParams);
    }
    let (h, w) = image.shape();
    if mask.shape() != (h, w) {
        return Err(CoreError::ShapeMismatch {
            a: (h, w),
            b: mask.shape(),
        });
    }
    if size > h || size > w {
        return Err(CoreError::TileTooLarge {
            size,
            height: h,
            width: w,
        });
    }
    let rows = axis_offsets(h, size, stride);
    let cols = axis_offsets(w, size, stride);
    let mut tiles = Vec::with_capacity(rows.len() * cols.len());
    for &r0 in &rows {
        for &c0 in &cols {
            let img = Array3::from_shape_fn((size, size, 3), |(r, c, ch)| {
                image.pixels()[(r0 + r, c0 + c, ch)]
            });
            let lab = Array2::from_shape_fn((size, size), |(r, c)| mask.labels()[(r0 + r, c0 + c)]);
            tiles.push(Tile {
                image: ImageArray::new(img)?,
                mask: SemanticMask::new(lab, mask.class_count())?,
                offset: (r0, c0),
            });
        }
    }
    Ok(tiles)
}

/// Reassembles tiles into an `(height, width)` pair. Overlapping tiles
/// overwrite in iteration order; with `stride == size` the round trip is
/// lossless.
pub fn untile(tiles: &[Tile], height: usize, width: usize) -> Result<(ImageArray, SemanticMask)> {
    let class_count = tiles
        .first()
        .map(|t| t.mask.class_count())
        .ok_or_else(|| CoreError::EmptyDataset("no tiles to reassemble".into()))?;
    let mut pixels = Array3::zeros((height, width, 3));
    let mut labels = Array2::zeros((height, width));
    for t in tiles {
        let (r0, c0) = t.offset;
        let (th, tw) = t.mask.shape();
        if r0 + th > height || c0 + tw > width {
            return Err(CoreError::ShapeMismatch {
                a: (r0 + th, c0 + tw),
                b: (height, width),
            });
        }
        for r in 0..th {
            for c in 0..tw {
                labels[(r0 + r, c0 + c)] = t.mask.labels()[(r, c)];
                for ch in 0..3 {
                    pixels[(r0 + r, c0 + c, ch)] = t.image.pixels()[(r, c, ch)];
                }
            }
        }
    }
    Ok((
        ImageArray::new(pixels)?,
        SemanticMask::new(labels, class_count)?,
    ))
}
