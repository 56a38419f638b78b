use std::collections::HashSet;
use std::sync::Arc;

use crate::algebra::atoms::{numeric, BetweenKernel};
use crate::algebra::{AlgebraError, AtomKernel, Band, Const, Event};
use crate::pattern::{expect_arity, ident_arg, num_arg, PredicateRegistry};

use super::{angular_difference, bearing_deg, distance_km, GeoContext, GeoPoint, Region};

pub const DEFAULT_HEADING_TOLERANCE_DEG: f64 = 15.0;

fn position(event: &Event) -> Result<GeoPoint, AlgebraError> {
    Ok(GeoPoint::new(
        numeric(event, "lon")?,
        numeric(event, "lat")?,
    ))
}

fn distance_quantity(p: GeoPoint) -> String {
    format!("dist:{:?},{:?}", p.lon, p.lat)
}

/// `lo <= distance(event, point) < hi`, kilometres.
#[derive(Debug, Clone)]
pub struct DistanceKernel {
    pub point: GeoPoint,
    pub lo: f64,
    pub hi: f64,
}

impl AtomKernel for DistanceKernel {
    fn eval(&self, event: &Event) -> Result<bool, AlgebraError> {
        let d = distance_km(position(event)?, self.point);
        Ok(self.lo <= d && d < self.hi)
    }

    fn band(&self) -> Option<Band> {
        Some(Band {
            quantity: distance_quantity(self.point),
            lo: self.lo,
            hi: self.hi,
        })
    }

    fn attributes(&self) -> Vec<String> {
        vec!["lon".into(), "lat".into()]
    }
}

/// `distance(event, point) < radius_km`.
#[derive(Debug, Clone)]
pub struct WithinCircleKernel {
    pub point: GeoPoint,
    pub radius_km: f64,
}

impl AtomKernel for WithinCircleKernel {
    fn eval(&self, event: &Event) -> Result<bool, AlgebraError> {
        Ok(distance_km(position(event)?, self.point) < self.radius_km)
    }

    fn band(&self) -> Option<Band> {
        Some(Band {
            quantity: distance_quantity(self.point),
            lo: f64::NEG_INFINITY,
            hi: self.radius_km,
        })
    }

    fn attributes(&self) -> Vec<String> {
        vec!["lon".into(), "lat".into()]
    }
}

#[derive(Debug, Clone)]
pub struct InAreaKernel {
    pub region: Region,
}

impl AtomKernel for InAreaKernel {
    fn eval(&self, event: &Event) -> Result<bool, AlgebraError> {
        Ok(self.region.contains(position(event)?))
    }

    fn attributes(&self) -> Vec<String> {
        vec!["lon".into(), "lat".into()]
    }
}

/// Course over ground within `tolerance_deg` of the bearing to `target`.
/// An event sitting on the target counts as heading towards it.
#[derive(Debug, Clone)]
pub struct HeadingTowardsKernel {
    pub target: GeoPoint,
    pub tolerance_deg: f64,
}

impl AtomKernel for HeadingTowardsKernel {
    fn eval(&self, event: &Event) -> Result<bool, AlgebraError> {
        let here = position(event)?;
        let heading = numeric(event, "heading")?;
        if distance_km(here, self.target) == 0.0 {
            return Ok(true);
        }
        Ok(angular_difference(heading, bearing_deg(here, self.target)) <= self.tolerance_deg)
    }

    fn attributes(&self) -> Vec<String> {
        vec!["lon".into(), "lat".into(), "heading".into()]
    }
}

/// Membership of the event's partition key in a vessel list.
#[derive(Debug, Clone)]
pub struct IsFishingVesselKernel {
    pub vessels: Arc<HashSet<String>>,
}

impl AtomKernel for IsFishingVesselKernel {
    fn eval(&self, event: &Event) -> Result<bool, AlgebraError> {
        Ok(self.vessels.contains(&*event.partition))
    }
}

fn point_arg(ctx: &GeoContext, arg: &Const) -> Result<GeoPoint, String> {
    match arg {
        Const::Pair(lon, lat) => GeoPoint::checked(*lon, *lat).map_err(|e| e.to_string()),
        Const::Ident(name) => ctx
            .points
            .get(name)
            .copied()
            .or_else(|| ctx.regions.get(name).map(Region::anchor))
            .ok_or_else(|| format!("unknown point `{name}`")),
        other => Err(format!("expected a point, got `{other}`")),
    }
}

/// Generic atoms plus `Distance`, `WithinCircle`, `InArea`, `SpeedBetween`,
/// `HeadingTowards` and `IsFishingVessel` bound to `ctx`.
pub fn builtin_registry(ctx: GeoContext) -> PredicateRegistry {
    let ctx = Arc::new(ctx);
    let mut reg = PredicateRegistry::generic();
    for (name, p) in &ctx.points {
        reg.define_constant(name, Const::Pair(p.lon, p.lat));
    }

    let c = ctx.clone();
    reg.register("Distance", move |args| {
        expect_arity(args, 3)?;
        Ok(Arc::new(DistanceKernel {
            point: point_arg(&c, &args[0])?,
            lo: num_arg(&args[1])?,
            hi: num_arg(&args[2])?,
        }))
    });
    let c = ctx.clone();
    reg.register("WithinCircle", move |args| {
        expect_arity(args, 2)?;
        Ok(Arc::new(WithinCircleKernel {
            point: point_arg(&c, &args[0])?,
            radius_km: num_arg(&args[1])?,
        }))
    });
    let c = ctx.clone();
    reg.register("InArea", move |args| {
        expect_arity(args, 1)?;
        let name = ident_arg(&args[0])?;
        let region = c
            .regions
            .get(&name)
            .cloned()
            .ok_or_else(|| format!("unknown region `{name}`"))?;
        Ok(Arc::new(InAreaKernel { region }))
    });
    reg.register("SpeedBetween", |args| {
        expect_arity(args, 2)?;
        Ok(Arc::new(BetweenKernel::new(
            "speed",
            num_arg(&args[0])?,
            num_arg(&args[1])?,
        )))
    });
    let c = ctx.clone();
    reg.register("HeadingTowards", move |args| {
        expect_arity(args, 1)?;
        Ok(Arc::new(HeadingTowardsKernel {
            target: point_arg(&c, &args[0])?,
            tolerance_deg: c.heading_tolerance_deg,
        }))
    });
    let vessels = Arc::new(ctx.fishing_vessels.clone());
    reg.register("IsFishingVessel", move |args| {
        expect_arity(args, 0)?;
        Ok(Arc::new(IsFishingVesselKernel {
            vessels: vessels.clone(),
        }))
    });
    reg
}

#[cfg(test)]
mod tests {
    use super::super::destination;
    use super::*;
    use crate::algebra::{MintermSet, PredicateFormula, SatOracle};
    use crate::pattern::parse_pattern;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    const PORT: GeoPoint = GeoPoint::new(-4.49, 48.38);

    fn ctx() -> GeoContext {
        let mut ctx = GeoContext::default();
        ctx.points.insert("PortCoords".into(), PORT);
        ctx.fishing_vessels.insert("F1".into());
        ctx
    }

    fn at(p: GeoPoint, heading: f64, vessel: &str) -> Event {
        Event::new(0, vessel)
            .with("lon", p.lon)
            .with("lat", p.lat)
            .with("speed", 8.0)
            .with("heading", heading)
    }

    fn formula(text: &str) -> PredicateFormula {
        let spec = parse_pattern(&format!("x WHERE {text}"), &builtin_registry(ctx())).unwrap();
        spec.binding("x").unwrap().clone()
    }

    #[test]
    fn distance_bands_at_six_km() {
        let e = at(destination(PORT, 45.0, 6.0), 0.0, "v");
        assert!(formula("Distance(x, PortCoords, 5.0, 7.0)")
            .evaluate(&e)
            .unwrap());
        assert!(!formula("Distance(x, PortCoords, 7.0, 10.0)")
            .evaluate(&e)
            .unwrap());
        assert!(!formula("WithinCircle(x, PortCoords, 5.0)")
            .evaluate(&e)
            .unwrap());
        assert!(formula("WithinCircle(x, (-4.49, 48.38), 6.5)")
            .evaluate(&e)
            .unwrap());
    }

    #[test]
    fn heading_towards() {
        let here = destination(PORT, 90.0, 8.0); // east of the port
        let f = formula("HeadingTowards(x, PortCoords)");
        let back = bearing_deg(here, PORT);
        assert!(f.evaluate(&at(here, back, "v")).unwrap());
        assert!(f.evaluate(&at(here, back + 14.0, "v")).unwrap());
        assert!(!f.evaluate(&at(here, back + 16.0, "v")).unwrap());
        assert!(f.evaluate(&at(PORT, 123.0, "v")).unwrap());
    }

    #[test]
    fn fishing_vessel_membership() {
        let f = formula("IsFishingVessel(x)");
        assert!(f.evaluate(&at(PORT, 0.0, "F1")).unwrap());
        assert!(!f.evaluate(&at(PORT, 0.0, "cargo-7")).unwrap());
    }

    #[test]
    fn unknown_point_is_rejected() {
        let err = parse_pattern(
            "x WHERE Distance(x, Nowhere, 1, 2)",
            &builtin_registry(ctx()),
        )
        .unwrap_err();
        assert!(err.to_string().contains("Nowhere"));
    }

    #[test]
    fn approaching_bands_prune_to_four_minterms() {
        let spec = parse_pattern(
            "x · y+ · z WHERE Distance(x, PortCoords, 7.0, 10.0) AND Distance(y, PortCoords, 5.0, 7.0) AND WithinCircle(z, PortCoords, 5.0)",
            &builtin_registry(ctx()),
        )
        .unwrap();
        let set = MintermSet::new(spec.predicates(), SatOracle::IntervalPruning).unwrap();
        assert_eq!(set.len(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let e = at(
                destination(PORT, rng.gen_range(0.0..360.0), rng.gen_range(0.0..15.0)),
                0.0,
                "v",
            );
            assert!(set.classify_index(&e).is_ok());
        }
    }

    /// Winding number of the ring around `p`; nonzero means inside.
    fn winding_number(p: GeoPoint, ring: &[GeoPoint]) -> i32 {
        let cross = |a: GeoPoint, b: GeoPoint| {
            (b.lon - a.lon) * (p.lat - a.lat) - (p.lon - a.lon) * (b.lat - a.lat)
        };
        let mut wn = 0;
        for i in 0..ring.len() {
            let (a, b) = (ring[i], ring[(i + 1) % ring.len()]);
            if a.lat <= p.lat {
                if b.lat > p.lat && cross(a, b) > 0.0 {
                    wn += 1;
                }
            } else if b.lat <= p.lat && cross(a, b) < 0.0 {
                wn -= 1;
            }
        }
        wn
    }

    #[test]
    fn ray_casting_matches_winding_number() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let kernel = |ring: Vec<GeoPoint>| InAreaKernel {
            region: Region::polygon(ring).unwrap(),
        };
        for _ in 0..10 {
            // convex polygon: sorted angles around a centre
            let n = rng.gen_range(3..9);
            let mut angles: Vec<f64> = (0..n)
                .map(|_| rng.gen_range(0.0..std::f64::consts::TAU))
                .collect();
            angles.sort_by(f64::total_cmp);
            let r = rng.gen_range(0.5..3.0);
            let ring: Vec<GeoPoint> = angles
                .iter()
                .map(|a| GeoPoint::new(10.0 + r * a.cos(), 40.0 + r * a.sin()))
                .collect();
            let k = kernel(ring.clone());
            for _ in 0..100 {
                let p = GeoPoint::new(rng.gen_range(6.0..14.0), rng.gen_range(36.0..44.0));
                let e = at(p, 0.0, "v");
                assert_eq!(k.eval(&e).unwrap(), winding_number(p, &ring) != 0);
            }
        }
    }
}
