use serde::{Deserialize, Serialize};

use crate::error::{CalibError, Result};

const CONTIGUITY_TOL: f64 = 1e-9;

/// Constant speed and yaw rate over `[start, start + duration)`. Zero yaw
/// rate is a straight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub start: f64,
    pub duration: f64,
    pub speed: f64,
    #[serde(default)]
    pub yaw_rate: f64,
}

impl Primitive {
    pub fn end(&self) -> f64 {
        self.start + self.duration
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Origin {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutePlan {
    #[serde(default)]
    pub origin: Origin,
    pub primitives: Vec<Primitive>,
}

/// Ground-truth vehicle state. Heading is continuous, not wrapped.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthState {
    pub t: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub speed: f64,
    pub yaw_rate: f64,
}

impl RoutePlan {
    pub fn builder() -> RouteBuilder {
        RouteBuilder {
            plan: RoutePlan {
                origin: Origin::default(),
                primitives: Vec::new(),
            },
            t: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.primitives.is_empty() {
            return Err(CalibError::EmptyInput("route primitives"));
        }
        for (i, p) in self.primitives.iter().enumerate() {
            let finite = [p.start, p.duration, p.speed, p.yaw_rate]
                .iter()
                .all(|v| v.is_finite());
            if !finite || p.duration <= 0.0 || p.speed < 0.0 {
                return Err(CalibError::InvalidInput(format!(
                    "route primitive {i} needs finite values, duration > 0, speed >= 0"
                )));
            }
            if i > 0 && (p.start - self.primitives[i - 1].end()).abs() > CONTIGUITY_TOL {
                return Err(CalibError::DiscontinuousPlan(i));
            }
        }
        Ok(())
    }

    pub fn t_start(&self) -> f64 {
        self.primitives.first().map_or(0.0, |p| p.start)
    }

    pub fn t_end(&self) -> f64 {
        self.primitives.last().map_or(0.0, |p| p.end())
    }
}

/// Appends contiguous primitives.
#[derive(Debug, Clone)]
pub struct RouteBuilder {
    plan: RoutePlan,
    t: f64,
}

impl RouteBuilder {
    pub fn origin(mut self, x: f64, y: f64, heading: f64) -> Self {
        self.plan.origin = Origin { x, y, heading };
        self
    }

    pub fn start_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }

    pub fn straight(self, duration: f64, speed: f64) -> Self {
        self.arc(duration, speed, 0.0)
    }

    pub fn arc(mut self, duration: f64, speed: f64, yaw_rate: f64) -> Self {
        self.plan.primitives.push(Primitive {
            start: self.t,
            duration,
            speed,
            yaw_rate,
        });
        self.t += duration;
        self
    }

    /// Turn through `angle` (positive left) on a circle of `radius`.
    pub fn turn(self, angle: f64, radius: f64, speed: f64) -> Self {
        let duration = angle.abs() * radius / speed;
        self.arc(duration, speed, angle.signum() * speed / radius)
    }

    pub fn build(self) -> RoutePlan {
        self.plan
    }
}

/// Validated plan with the state at each primitive start precomputed.
#[derive(Debug, Clone)]
pub struct Route {
    plan: RoutePlan,
    starts: Vec<TruthState>,
}

fn advance(s: &TruthState, p: &Primitive, tau: f64) -> TruthState {
    let h = s.heading + p.yaw_rate * tau;
    let (x, y) = if p.yaw_rate == 0.0 {
        (
            s.x + p.speed * tau * s.heading.cos(),
            s.y + p.speed * tau * s.heading.sin(),
        )
    } else {
        let r = p.speed / p.yaw_rate;
        (
            s.x + r * (h.sin() - s.heading.sin()),
            s.y - r * (h.cos() - s.heading.cos()),
        )
    };
    TruthState {
        t: p.start + tau,
        x,
        y,
        heading: h,
        speed: p.speed,
        yaw_rate: p.yaw_rate,
    }
}

impl Route {
    pub fn new(plan: RoutePlan) -> Result<Self> {
        plan.validate()?;
        let o = plan.origin;
        let mut s = TruthState {
            t: plan.t_start(),
            x: o.x,
            y: o.y,
            heading: o.heading,
            speed: 0.0,
            yaw_rate: 0.0,
        };
        let mut starts = Vec::with_capacity(plan.primitives.len());
        for p in &plan.primitives {
            s = TruthState {
                t: p.start,
                speed: p.speed,
                yaw_rate: p.yaw_rate,
                ..s
            };
            starts.push(s);
            s = advance(&s, p, p.duration);
        }
        Ok(Self { plan, starts })
    }

    pub fn plan(&self) -> &RoutePlan {
        &self.plan
    }

    pub fn t_start(&self) -> f64 {
        self.plan.t_start()
    }

    pub fn t_end(&self) -> f64 {
        self.plan.t_end()
    }

    /// Closed-form state at `t`, clamped to the plan.
    pub fn state_at(&self, t: f64) -> TruthState {
        let t = t.clamp(self.t_start(), self.t_end());
        let ps = &self.plan.primitives;
        let i = ps.partition_point(|p| p.start <= t).saturating_sub(1);
        advance(&self.starts[i], &ps[i], t - ps[i].start)
    }

    /// Sample times `t_start + k / rate` within the plan.
    pub fn sample_times(&self, rate_hz: f64) -> Vec<f64> {
        let n = ((self.t_end() - self.t_start()) * rate_hz + 1e-9).floor() as usize;
        (0..=n)
            .map(|k| self.t_start() + k as f64 / rate_hz)
            .collect()
    }
}

/// Dense ground truth at `rate_hz`.
pub fn gen_trajectory(plan: &RoutePlan, rate_hz: f64) -> Result<Vec<TruthState>> {
    if !(rate_hz > 0.0) {
        return Err(CalibError::InvalidInput("rate must be positive".into()));
    }
    let route = Route::new(plan.clone())?;
    Ok(route
        .sample_times(rate_hz)
        .into_iter()
        .map(|t| route.state_at(t))
        .collect())
}
