//! Row-major 2D grids used for images, masks, and label maps.

/// A dense `width x height` grid stored row-major.
///
/// `(u, v)` indexes column `u` and row `v`, matching image pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Grid { width, height, data: vec![value; width * height] }
    }
}

impl<T> Grid<T> {
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for v in 0..height {
            for u in 0..width {
                data.push(f(u, v));
            }
        }
        Grid { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        u < self.width && v < self.height
    }

    pub fn get(&self, u: usize, v: usize) -> Option<&T> {
        self.contains(u, v).then(|| &self.data[v * self.width + u])
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }
}

impl<T> std::ops::Index<(usize, usize)> for Grid<T> {
    type Output = T;
    fn index(&self, (u, v): (usize, usize)) -> &T {
        debug_assert!(self.contains(u, v));
        &self.data[v * self.width + u]
    }
}

impl<T> std::ops::IndexMut<(usize, usize)> for Grid<T> {
    fn index_mut(&mut self, (u, v): (usize, usize)) -> &mut T {
        debug_assert!(self.contains(u, v));
        &mut self.data[v * self.width + u]
    }
}

/// 8-bit RGB image.
pub type ColorImage = Grid<[u8; 3]>;

/// Single-channel float image with values in `[0, 1]`.
pub type GrayImage = Grid<f32>;

/// Converts RGB to grayscale with the usual luma weights.
pub fn to_gray(image: &ColorImage) -> GrayImage {
    Grid::from_fn(image.width(), image.height(), |u, v| {
        let [r, g, b] = image[(u, v)];
        (0.299 * r as f32 + 0.587 * g as f32 + 0.114 * b as f32) / 255.0
    })
}

/// RGB (each in `[0, 255]`) to HSV with hue in degrees `[0, 360)` and
/// saturation/value in `[0, 1]`.
pub fn rgb_to_hsv([r, g, b]: [u8; 3]) -> (f64, f64, f64) {
    let r = r as f64 / 255.0;
    let g = g as f64 / 255.0;
    let b = b as f64 / 255.0;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (((g - b) / delta).rem_euclid(6.0))
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    let s = if max == 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

/// HSV (hue in degrees, saturation/value in `[0, 1]`) to linear RGB floats.
pub fn hsv_to_rgb_f32(h_deg: f64, s: f64, v: f64) -> [f32; 3] {
    let h = h_deg.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - (h.rem_euclid(2.0) - 1.0).abs());
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = v - c;
    [(r + m) as f32, (g + m) as f32, (b + m) as f32]
}
