//! Scripted occluders: gray convex polygons that sweep across the image
//! plane for a time window, hiding the tissue behind them.

/// Depth of the occluder plane in front of the tissue (mm along the camera
/// z-axis).
pub const OCCLUDER_DEPTH_MM: f64 = 100.0;
/// Flat occluder color; unsaturated so segmentation rejects it.
pub const OCCLUDER_COLOR: [u8; 3] = [126, 127, 130];

/// One occlusion event: a convex polygon in image coordinates, shown during
/// `[t_start_s, t_end_s]` while translating linearly from `sweep_from_px` to
/// `sweep_to_px`.
#[derive(Debug, Clone, PartialEq)]
pub struct OccluderEvent {
    pub t_start_s: f64,
    pub t_end_s: f64,
    /// Convex polygon vertices (u, v) in pixels, in consistent winding
    /// order, before the sweep offset is applied.
    pub polygon_px: Vec<(f64, f64)>,
    pub sweep_from_px: (f64, f64),
    pub sweep_to_px: (f64, f64),
}

impl OccluderEvent {
    /// A stationary occluder covering the given pixel rectangle.
    pub fn static_rectangle(t_start_s: f64, t_end_s: f64, u0: f64, v0: f64, u1: f64, v1: f64) -> Self {
        OccluderEvent {
            t_start_s,
            t_end_s,
            polygon_px: vec![(u0, v0), (u1, v0), (u1, v1), (u0, v1)],
            sweep_from_px: (0.0, 0.0),
            sweep_to_px: (0.0, 0.0),
        }
    }

    pub fn active(&self, t_s: f64) -> bool {
        t_s >= self.t_start_s && t_s <= self.t_end_s
    }

    /// Sweep offset at time `t`, interpolated over the active window.
    pub fn offset_at(&self, t_s: f64) -> (f64, f64) {
        let span = self.t_end_s - self.t_start_s;
        let f = if span > 0.0 { ((t_s - self.t_start_s) / span).clamp(0.0, 1.0) } else { 0.0 };
        (
            self.sweep_from_px.0 + f * (self.sweep_to_px.0 - self.sweep_from_px.0),
            self.sweep_from_px.1 + f * (self.sweep_to_px.1 - self.sweep_from_px.1),
        )
    }

    pub fn covers(&self, u: f64, v: f64, t_s: f64) -> bool {
        if !self.active(t_s) {
            return false;
        }
        let (du, dv) = self.offset_at(t_s);
        point_in_convex_polygon(u - du, v - dv, &self.polygon_px)
    }
}

/// Point-in-convex-polygon by uniform cross-product sign; accepts either
/// winding order and counts the boundary as inside.
pub fn point_in_convex_polygon(u: f64, v: f64, polygon: &[(f64, f64)]) -> bool {
    if polygon.len() < 3 {
        return false;
    }
    let mut sign = 0.0f64;
    for i in 0..polygon.len() {
        let (ax, ay) = polygon[i];
        let (bx, by) = polygon[(i + 1) % polygon.len()];
        let cross = (bx - ax) * (v - ay) - (by - ay) * (u - ax);
        if cross.abs() < 1e-12 {
            continue;
        }
        if sign == 0.0 {
            sign = cross.signum();
        } else if cross.signum() != sign {
            return false;
        }
    }
    true
}

/// True when any event in the script covers the pixel at time `t`.
pub fn any_occluder_covers(events: &[OccluderEvent], u: f64, v: f64, t_s: f64) -> bool {
    events.iter().any(|e| e.covers(u, v, t_s))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_containment_both_windings() {
        let ccw = vec![(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)];
        let cw: Vec<_> = ccw.iter().rev().cloned().collect();
        for poly in [&ccw, &cw] {
            assert!(point_in_convex_polygon(5.0, 5.0, poly));
            assert!(point_in_convex_polygon(0.0, 0.0, poly), "corner counts as inside");
            assert!(point_in_convex_polygon(10.0, 5.0, poly), "edge counts as inside");
            assert!(!point_in_convex_polygon(10.01, 5.0, poly));
            assert!(!point_in_convex_polygon(-0.1, 5.0, poly));
        }
    }

    #[test]
    fn triangle_containment() {
        let tri = vec![(0.0, 0.0), (20.0, 0.0), (0.0, 20.0)];
        assert!(point_in_convex_polygon(5.0, 5.0, &tri));
        assert!(!point_in_convex_polygon(15.0, 15.0, &tri));
    }

    #[test]
    fn event_window_and_sweep() {
        let event = OccluderEvent {
            t_start_s: 1.0,
            t_end_s: 3.0,
            polygon_px: vec![(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)],
            sweep_from_px: (100.0, 50.0),
            sweep_to_px: (200.0, 50.0),
        };
        assert!(!event.covers(105.0, 55.0, 0.5), "inactive before the window");
        assert!(event.covers(105.0, 55.0, 1.0), "sweep starts at sweep_from");
        assert!(event.covers(155.0, 55.0, 2.0), "midpoint of the sweep");
        assert!(event.covers(205.0, 55.0, 3.0), "sweep ends at sweep_to");
        assert!(!event.covers(105.0, 55.0, 3.5), "inactive after the window");
        assert!(!event.covers(305.0, 55.0, 2.0));
    }

    #[test]
    fn static_rectangle_covers_its_box() {
        let event = OccluderEvent::static_rectangle(0.0, 1.0, 10.0, 20.0, 30.0, 40.0);
        assert!(event.covers(20.0, 30.0, 0.5));
        assert!(!event.covers(5.0, 30.0, 0.5));
        assert!(!event.covers(20.0, 45.0, 0.5));
    }
}
