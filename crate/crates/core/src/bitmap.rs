use crate::label::Rect;

/// Row-major bit grid; bit `(x, y)` lives at index `y * width + x`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bitmap {
    width: u32,
    height: u32,
    words: Vec<u64>,
}

impl Bitmap {
    pub fn new(width: u32, height: u32) -> Self {
        let bits = width as usize * height as usize;
        Bitmap {
            width,
            height,
            words: vec![0; bits.div_ceil(64)],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    fn index(&self, x: u32, y: u32) -> usize {
        y as usize * self.width as usize + x as usize
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        let i = self.index(x, y);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, x: u32, y: u32) {
        let i = self.index(x, y);
        self.words[i / 64] |= 1 << (i % 64);
    }

    /// Sets bits `start..end` of the flat bit vector.
    fn set_span(&mut self, start: usize, end: usize) {
        let mut i = start;
        while i < end {
            let word = i / 64;
            let offset = i % 64;
            let take = (64 - offset).min(end - i);
            let mask = if take == 64 {
                u64::MAX
            } else {
                ((1u64 << take) - 1) << offset
            };
            self.words[word] |= mask;
            i += take;
        }
    }

    pub fn fill_rect(&mut self, r: &Rect) {
        if r.x0 >= r.x1 {
            return;
        }
        for y in r.y0..r.y1 {
            let row = self.index(0, y);
            self.set_span(row + r.x0 as usize, row + r.x1 as usize);
        }
    }

    pub fn count_ones(&self) -> u64 {
        self.words.iter().map(|w| u64::from(w.count_ones())).sum()
    }

    /// Returns `(|a ∩ b|, |a ∪ b|)`.
    pub fn overlap(&self, other: &Bitmap) -> (u64, u64) {
        debug_assert_eq!((self.width, self.height), (other.width, other.height));
        self.words
            .iter()
            .zip(&other.words)
            .fold((0, 0), |(i, u), (a, b)| {
                (i + u64::from((a & b).count_ones()), u + u64::from((a | b).count_ones()))
            })
    }

    /// Decomposes the set bits into disjoint rectangles: horizontal runs,
    /// merged downwards while the run below has the same extent.
    ///
    /// Disjoint, non-touching rectangles come back unchanged.
    pub fn to_rects(&self) -> Vec<Rect> {
        let mut done: Vec<Rect> = Vec::new();
        let mut open: Vec<Rect> = Vec::new();
        for y in 0..self.height {
            let mut runs = Vec::new();
            let mut x = 0;
            while x < self.width {
                if self.get(x, y) {
                    let start = x;
                    while x < self.width && self.get(x, y) {
                        x += 1;
                    }
                    runs.push((start, x));
                } else {
                    x += 1;
                }
            }
            let mut next_open = Vec::with_capacity(runs.len());
            for (x0, x1) in runs {
                if let Some(pos) = open.iter().position(|r| r.x0 == x0 && r.x1 == x1) {
                    let mut r = open.swap_remove(pos);
                    r.y1 = y + 1;
                    next_open.push(r);
                } else {
                    next_open.push(Rect::new(x0, y, x1, y + 1));
                }
            }
            done.append(&mut open);
            open = next_open;
        }
        done.append(&mut open);
        done.sort();
        done
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fill_and_count() {
        let mut b = Bitmap::new(70, 3);
        b.fill_rect(&Rect::new(2, 0, 69, 2));
        assert_eq!(b.count_ones(), 67 * 2);
        assert!(b.get(2, 0) && b.get(68, 1) && !b.get(69, 1) && !b.get(5, 2));
    }

    #[test]
    fn separated_rects_round_trip() {
        let rects = vec![Rect::new(0, 0, 3, 2), Rect::new(5, 1, 7, 6), Rect::new(0, 4, 2, 8)];
        let mut b = Bitmap::new(8, 8);
        for r in &rects {
            b.fill_rect(r);
        }
        let mut expected = rects.clone();
        expected.sort();
        assert_eq!(b.to_rects(), expected);
    }

    #[test]
    fn decomposition_covers_same_bits() {
        let mut b = Bitmap::new(10, 10);
        b.fill_rect(&Rect::new(0, 0, 6, 6));
        b.fill_rect(&Rect::new(3, 3, 9, 9));
        let mut c = Bitmap::new(10, 10);
        for r in b.to_rects() {
            c.fill_rect(&r);
        }
        assert_eq!(b, c);
    }
}
