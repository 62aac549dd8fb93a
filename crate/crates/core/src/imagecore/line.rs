use super::Point;
use crate::error::{Error, Result};

/// Ordered 8-connected run of pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelPath(pub Vec<Point>);

impl PixelPath {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn points(&self) -> &[Point] {
        &self.0
    }

    /// True when consecutive pixels are distinct and 8-adjacent.
    pub fn is_8_connected(&self) -> bool {
        self.0.windows(2).all(|w| {
            let dx = (w[1].x - w[0].x).abs();
            let dy = (w[1].y - w[0].y).abs();
            dx <= 1 && dy <= 1 && (dx, dy) != (0, 0)
        })
    }
}

/// Integer Bresenham walk from `from` to `to`, inclusive of both endpoints.
///
/// Works in all octants. When the error term allows stepping both axes the
/// step is diagonal, so the walk visits exactly `max(|dx|, |dy|) + 1` pixels.
#[derive(Debug, Clone)]
pub(crate) struct LineWalk {
    x: i64,
    y: i64,
    end: Point,
    dx: i64,
    dy: i64,
    sx: i64,
    sy: i64,
    err: i64,
    done: bool,
}

impl LineWalk {
    pub(crate) fn new(from: Point, to: Point) -> Self {
        let dx = (to.x - from.x).abs();
        let dy = -(to.y - from.y).abs();
        LineWalk {
            x: from.x,
            y: from.y,
            end: to,
            dx,
            dy,
            sx: if from.x < to.x { 1 } else { -1 },
            sy: if from.y < to.y { 1 } else { -1 },
            err: dx + dy,
            done: false,
        }
    }
}

impl Iterator for LineWalk {
    type Item = Point;

    #[inline]
    fn next(&mut self) -> Option<Point> {
        if self.done {
            return None;
        }
        let current = Point::new(self.x, self.y);
        if self.x == self.end.x && self.y == self.end.y {
            self.done = true;
            return Some(current);
        }
        let e2 = 2 * self.err;
        if e2 >= self.dy {
            self.err += self.dy;
            self.x += self.sx;
        }
        if e2 <= self.dx {
            self.err += self.dx;
            self.y += self.sy;
        }
        Some(current)
    }
}

/// Rasterizes the segment `p`–`q` on a `width x height` grid.
pub fn bresenham(p: Point, q: Point, (width, height): (usize, usize)) -> Result<PixelPath> {
    for pt in [p, q] {
        if pt.x < 0 || pt.y < 0 || pt.x as usize >= width || pt.y as usize >= height {
            return Err(Error::OutOfBounds {
                x: pt.x,
                y: pt.y,
                width,
                height,
            });
        }
    }
    Ok(PixelPath(LineWalk::new(p, q).collect()))
}
