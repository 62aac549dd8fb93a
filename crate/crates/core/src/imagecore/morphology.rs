use super::BinaryMask;

/// Offsets `(dx, dy)` of the discrete disc `dx² + dy² <= r²`.
pub fn disc_offsets(radius: usize) -> Vec<(i64, i64)> {
    let r = radius as i64;
    let mut out = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                out.push((dx, dy));
            }
        }
    }
    out
}

/// Binary erosion by a disc. A pixel survives iff every disc offset lands on
/// a set pixel inside the image; pixels outside the image count as unset.
pub fn erode(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let offsets = disc_offsets(radius);
    BinaryMask::from_fn(w, h, |x, y| {
        mask.get(x, y)
            && offsets.iter().all(|&(dx, dy)| {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                nx >= 0
                    && ny >= 0
                    && (nx as usize) < w
                    && (ny as usize) < h
                    && mask.get(nx as usize, ny as usize)
            })
    })
}

/// Binary dilation by a disc. A pixel is set iff some disc offset lands on a
/// set pixel inside the image.
pub fn dilate(mask: &BinaryMask, radius: usize) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    let (w, h) = mask.dims();
    let offsets = disc_offsets(radius);
    let mut out = BinaryMask::empty(w, h);
    for idx in mask.indices() {
        let (x, y) = ((idx % w) as i64, (idx / w) as i64);
        for &(dx, dy) in &offsets {
            let (nx, ny) = (x + dx, y + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < w && (ny as usize) < h {
                out.set(nx as usize, ny as usize, true);
            }
        }
    }
    out
}
