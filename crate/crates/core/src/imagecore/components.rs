use super::{BinaryMask, LabelMap};

#[derive(Debug, PartialEq, Eq, Copy, Clone)]
pub enum Connectivity {
    Four,
    Eight,
}

impl Connectivity {
    /// Neighbour offsets `(dx, dy)`.
    pub fn offsets(self) -> &'static [(i64, i64)] {
        match self {
            Connectivity::Four => &[(1, 0), (-1, 0), (0, 1), (0, -1)],
            Connectivity::Eight => &[
                (1, 0),
                (-1, 0),
                (0, 1),
                (0, -1),
                (1, 1),
                (1, -1),
                (-1, 1),
                (-1, -1),
            ],
        }
    }
}

/// Labelled components of a mask. `sizes[k - 1]` is the pixel count of
/// component `k`.
#[derive(Debug, Clone)]
pub struct Components {
    pub labels: LabelMap,
    pub sizes: Vec<usize>,
}

impl Components {
    pub fn count(&self) -> usize {
        self.sizes.len()
    }
}

struct DisjointSets {
    parent: Vec<u32>,
}

impl DisjointSets {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.parent[x as usize] != x {
            let p = self.parent[x as usize];
            self.parent[x as usize] = self.parent[p as usize];
            x = p;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Two-pass union-find labelling. Ids are compact from 1 and ordered by the
/// first pixel of each component in raster order.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> Components {
    let (w, h) = mask.dims();
    let mut provisional = vec![0u32; w * h];
    let mut sets = DisjointSets { parent: vec![0] };

    // already-visited neighbours in raster order
    let back: &[(i64, i64)] = match connectivity {
        Connectivity::Four => &[(-1, 0), (0, -1)],
        Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
    };

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut current = 0u32;
            for &(dx, dy) in back {
                let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                if nx < 0 || ny < 0 || nx as usize >= w {
                    continue;
                }
                let n = provisional[ny as usize * w + nx as usize];
                if n == 0 {
                    continue;
                }
                current = if current == 0 { n } else { sets.union(current, n) };
            }
            if current == 0 {
                current = sets.parent.len() as u32;
                sets.parent.push(current);
            }
            provisional[y * w + x] = current;
        }
    }

    let mut remap = vec![0u32; sets.parent.len()];
    let mut sizes = Vec::new();
    let mut labels = vec![0u32; w * h];
    for (i, p) in provisional.iter().enumerate() {
        if *p == 0 {
            continue;
        }
        let root = sets.find(*p) as usize;
        if remap[root] == 0 {
            sizes.push(0);
            remap[root] = sizes.len() as u32;
        }
        let id = remap[root];
        sizes[id as usize - 1] += 1;
        labels[i] = id;
    }

    Components {
        labels: LabelMap::new(w, h, labels).expect("dimensions preserved"),
        sizes,
    }
}
