use serde::{Deserialize, Serialize};

use super::{DatasetError, Direction, Point3};

/// Tabletop scene: the object start, three place markers, three partner faces
/// and three handover points (each ordered L, M, R along the x axis), plus the
/// actor's eye position used as the viewpoint for gaze and head directions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneGeometry {
    pub ball_start: Point3,
    pub place_markers: [Point3; 3],
    pub partner_faces: [Point3; 3],
    pub handover_points: [Point3; 3],
    #[serde(default = "default_actor_eye")]
    pub actor_eye: Point3,
}

fn default_actor_eye() -> Point3 {
    [0.0, -0.35, 0.5]
}

impl Default for SceneGeometry {
    fn default() -> Self {
        Self::tabletop(0.4, 0.4, 0.25, 0.45)
    }
}

impl SceneGeometry {
    /// Markers at lateral offsets `{-spacing, 0, +spacing}` and the given depth
    /// on the table plane; handover points and faces stacked above each marker.
    pub fn tabletop(spacing: f64, depth: f64, handover_height: f64, face_height: f64) -> Self {
        let marker = |x: f64| [x, depth, 0.0];
        let xs = [-spacing, 0.0, spacing];
        Self {
            ball_start: [0.0, 0.0, 0.0],
            place_markers: xs.map(marker),
            partner_faces: xs.map(|x| [x, depth, face_height]),
            handover_points: xs.map(|x| [x, depth, handover_height]),
            actor_eye: default_actor_eye(),
        }
    }

    pub fn place_marker(&self, d: Direction) -> Point3 {
        self.place_markers[d.index()]
    }

    pub fn partner_face(&self, d: Direction) -> Point3 {
        self.partner_faces[d.index()]
    }

    pub fn handover_point(&self, d: Direction) -> Point3 {
        self.handover_points[d.index()]
    }

    /// The ten task points in a fixed order (start, markers, faces, handovers).
    pub fn points(&self) -> [Point3; 10] {
        let mut out = [[0.0; 3]; 10];
        out[0] = self.ball_start;
        out[1..4].copy_from_slice(&self.place_markers);
        out[4..7].copy_from_slice(&self.partner_faces);
        out[7..10].copy_from_slice(&self.handover_points);
        out
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let pts = self.points();
        if pts.iter().flatten().any(|v| !v.is_finite()) {
            return Err(DatasetError::Geometry("non-finite coordinate".into()));
        }
        for i in 0..pts.len() {
            for j in (i + 1)..pts.len() {
                if pts[i] == pts[j] {
                    return Err(DatasetError::Geometry(format!(
                        "points {i} and {j} coincide"
                    )));
                }
            }
        }
        for (name, group) in [
            ("place_markers", &self.place_markers),
            ("partner_faces", &self.partner_faces),
            ("handover_points", &self.handover_points),
        ] {
            if !(group[0][0] < group[1][0] && group[1][0] < group[2][0]) {
                return Err(DatasetError::Geometry(format!(
                    "{name} not ordered left < middle < right"
                )));
            }
        }
        if self.actor_eye.iter().any(|v| !v.is_finite()) {
            return Err(DatasetError::Geometry("actor_eye non-finite".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_is_valid() {
        let g = SceneGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.place_marker(Direction::Left), [-0.4, 0.4, 0.0]);
        assert_eq!(g.handover_point(Direction::Right), [0.4, 0.4, 0.25]);
        assert_eq!(g.partner_face(Direction::Middle), [0.0, 0.4, 0.45]);
    }

    #[test]
    fn rejects_unordered_and_duplicate_points() {
        let mut g = SceneGeometry::default();
        g.place_markers.swap(0, 2);
        assert!(g.validate().is_err());

        let mut g = SceneGeometry::default();
        g.handover_points[1] = g.partner_faces[1];
        assert!(g.validate().is_err());
    }
}
