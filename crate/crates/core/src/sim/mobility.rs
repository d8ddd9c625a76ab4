//! Random-waypoint mobility with zero pause time.

use rand::Rng;

use crate::sim::config::Area;
use crate::social::Position;

pub fn random_point<R: Rng + ?Sized>(area: Area, rng: &mut R) -> Position {
    Position::new(
        rng.gen::<f64>() * area.width,
        rng.gen::<f64>() * area.height,
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Waypoint {
    pub target: Position,
    /// m/s
    pub speed: f64,
}

/// Advances `pos` towards its waypoint by at most `speed * dt`. When the
/// waypoint is within reach the device lands on it and a new waypoint is
/// drawn; the new target is returned in that case.
pub fn step_mobility<R: Rng + ?Sized>(
    pos: &mut Position,
    wp: &mut Waypoint,
    area: Area,
    dt: f64,
    rng: &mut R,
) -> Option<Position> {
    let reach = wp.speed * dt;
    let dist = pos.distance(&wp.target);
    if dist <= reach {
        *pos = wp.target;
        wp.target = random_point(area, rng);
        return Some(wp.target);
    }
    let k = reach / dist;
    pos.x += (wp.target.x - pos.x) * k;
    pos.y += (wp.target.y - pos.y) * k;
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const AREA: Area = Area {
        width: 100.0,
        height: 100.0,
    };

    #[test]
    fn at_waypoint_draws_new_target_without_moving() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pos = Position::new(3.0, 4.0);
        let mut wp = Waypoint {
            target: pos,
            speed: 2.0,
        };
        let fresh = step_mobility(&mut pos, &mut wp, AREA, 1.0, &mut rng);
        assert_eq!(pos, Position::new(3.0, 4.0));
        assert!(fresh.is_some());
    }

    #[test]
    fn moves_towards_target() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut pos = Position::new(0.0, 0.0);
        let mut wp = Waypoint {
            target: Position::new(30.0, 40.0),
            speed: 5.0,
        };
        assert_eq!(step_mobility(&mut pos, &mut wp, AREA, 1.0, &mut rng), None);
        assert!((pos.x - 3.0).abs() < 1e-12 && (pos.y - 4.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn stays_in_area_and_bounded(seed in any::<u64>(), speed in 0.0f64..10.0, steps in 1usize..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pos = random_point(AREA, &mut rng);
            let mut wp = Waypoint { target: random_point(AREA, &mut rng), speed };
            for _ in 0..steps {
                let before = pos;
                step_mobility(&mut pos, &mut wp, AREA, 1.0, &mut rng);
                prop_assert!(before.distance(&pos) <= speed + 1e-9);
                prop_assert!((0.0..=AREA.width).contains(&pos.x));
                prop_assert!((0.0..=AREA.height).contains(&pos.y));
            }
        }
    }
}
