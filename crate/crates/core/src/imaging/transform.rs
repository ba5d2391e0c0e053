use super::{Image, ImagingError, ViewSpec, CHANNELS};

/// Source position of an output sample on one axis, with pixel-center
/// alignment, as an exact fraction over `2 * out_len`. Returns the two
/// neighbouring source indices and the numerator of the second one's weight.
#[inline]
fn sample_axis(out: usize, out_len: usize, in_len: usize) -> (usize, usize, u64) {
    let denom = 2 * out_len as i64;
    // ((out + 0.5) * in_len / out_len - 0.5) * denom
    let pos = ((2 * out as i64 + 1) * in_len as i64 - out_len as i64)
        .clamp(0, (in_len as i64 - 1) * denom);
    let lo = (pos / denom) as usize;
    let hi = (lo + 1).min(in_len - 1);
    (lo, hi, (pos % denom) as u64)
}

/// Rounds `num / den` to the nearest integer, ties to even.
#[inline]
fn div_round_half_even(num: u64, den: u64) -> u64 {
    let q = num / den;
    let r2 = 2 * (num % den);
    if r2 > den || (r2 == den && q % 2 == 1) {
        q + 1
    } else {
        q
    }
}

/// Bilinear resize with pixel-center sampling. Weights are exact
/// fractions, so every output sample is the exact bilinear value rounded
/// half-to-even, independent of platform and evaluation order.
pub fn resize(img: &Image, width: usize, height: usize) -> Result<Image, ImagingError> {
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptyImage { width, height });
    }
    if width == img.width() && height == img.height() {
        return Ok(img.clone());
    }
    let dx = 2 * width as u64;
    let dy = 2 * height as u64;
    let cols: Vec<_> = (0..width)
        .map(|x| sample_axis(x, width, img.width()))
        .collect();

    let mut data = Vec::with_capacity(width * height * CHANNELS);
    for y in 0..height {
        let (y0, y1, fy) = sample_axis(y, height, img.height());
        for &(x0, x1, fx) in &cols {
            for c in 0..CHANNELS {
                let at = |x, y| u64::from(img.sample(x, y, c));
                let top = (dx - fx) * at(x0, y0) + fx * at(x1, y0);
                let bottom = (dx - fx) * at(x0, y1) + fx * at(x1, y1);
                let v = div_round_half_even((dy - fy) * top + fy * bottom, dx * dy);
                data.push(v.min(255) as u8);
            }
        }
    }
    Image::new(width, height, data)
}

/// Resizes to `side`×`side` regardless of the input aspect ratio.
pub fn resize_to_square(img: &Image, side: usize) -> Result<Image, ImagingError> {
    resize(img, side, side)
}

/// Produces the square source a policy is applied to. Square inputs are
/// resized directly; otherwise the shorter side is scaled to `side` and the
/// longer side is center-cropped.
pub fn fit_square(img: &Image, side: usize) -> Result<Image, ImagingError> {
    let (w, h) = (img.width(), img.height());
    if w == h {
        return resize_to_square(img, side);
    }
    let short = w.min(h);
    let long = w.max(h);
    let scaled_long = ((long as f64 * side as f64 / short as f64).round() as usize).max(side);
    let (rw, rh) = if w < h {
        (side, scaled_long)
    } else {
        (scaled_long, side)
    };
    let resized = resize(img, rw, rh)?;
    let spec = ViewSpec {
        x: (rw - side) / 2,
        y: (rh - side) / 2,
        width: side,
        height: side,
        hflip: false,
    };
    crop(&resized, &spec)
}

/// Extracts the rectangle described by `spec`, mirroring columns when
/// `spec.hflip` is set.
pub fn crop(img: &Image, spec: &ViewSpec) -> Result<Image, ImagingError> {
    if !spec.fits(img.width(), img.height()) {
        return Err(ImagingError::CropOutOfBounds {
            x: spec.x,
            y: spec.y,
            w: spec.width,
            h: spec.height,
            width: img.width(),
            height: img.height(),
        });
    }
    let row_bytes = spec.width * CHANNELS;
    let mut data = Vec::with_capacity(row_bytes * spec.height);
    for y in spec.y..spec.y + spec.height {
        let start = (y * img.width() + spec.x) * CHANNELS;
        let row = &img.data()[start..start + row_bytes];
        if spec.hflip {
            for px in row.chunks_exact(CHANNELS).rev() {
                data.extend_from_slice(px);
            }
        } else {
            data.extend_from_slice(row);
        }
    }
    Image::new(spec.width, spec.height, data)
}
