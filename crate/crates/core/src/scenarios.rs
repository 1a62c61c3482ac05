//! Built-in domains and runnable scenarios.

use serde::{Deserialize, Serialize};

use crate::domain::{
    ConstraintKind, DomainSpec, LoadProfile, PieceSpec, PiecewiseDomain, Tolerances,
};
use crate::error::{Error, Result};
use crate::integrator::{FieldSpec, Scheme, VectorField};

fn piece(
    label: &str,
    inequalities: Vec<ConstraintKind>,
    equalities: Vec<ConstraintKind>,
) -> PieceSpec {
    PieceSpec {
        label: label.into(),
        inequalities,
        equalities,
    }
}

fn spec(dimension: usize, pieces: Vec<PieceSpec>) -> DomainSpec {
    DomainSpec {
        dimension,
        tolerances: Tolerances::default(),
        pieces,
    }
}

fn build(spec: DomainSpec) -> PiecewiseDomain {
    spec.build().expect("built-in domain is well formed")
}

/// `{x₂ ≥ 0, x₂ ≤ |x₁| − t}` as the two branches of `|x₁|`, right branch first.
pub fn wedge_spec() -> DomainSpec {
    let aff = ConstraintKind::affine;
    spec(
        2,
        vec![
            piece(
                "right",
                vec![
                    aff(vec![-1.0, 0.0], 0.0, 0.0),
                    aff(vec![0.0, -1.0], 0.0, 0.0),
                    aff(vec![-1.0, 1.0], 1.0, 0.0),
                ],
                vec![],
            ),
            piece(
                "left",
                vec![
                    aff(vec![1.0, 0.0], 0.0, 0.0),
                    aff(vec![0.0, -1.0], 0.0, 0.0),
                    aff(vec![1.0, 1.0], 1.0, 0.0),
                ],
                vec![],
            ),
        ],
    )
}

pub fn wedge_domain() -> PiecewiseDomain {
    build(wedge_spec())
}

/// `{x₂ ≥ 0, x₂ ≤ x₁² − t}`
pub fn parabola_spec() -> DomainSpec {
    spec(
        2,
        vec![piece(
            "parabola",
            vec![
                ConstraintKind::affine(vec![0.0, -1.0], 0.0, 0.0),
                ConstraintKind::Quadratic {
                    matrix: vec![vec![-1.0, 0.0], vec![0.0, 0.0]],
                    linear: vec![0.0, 1.0],
                    time: 1.0,
                    offset: 0.0,
                },
            ],
            vec![],
        )],
    )
}

pub fn parabola_domain() -> PiecewiseDomain {
    build(parabola_spec())
}

/// `{‖x‖² ≤ 1}` in R².
pub fn unit_disk_spec() -> DomainSpec {
    spec(
        2,
        vec![piece(
            "disk",
            vec![ConstraintKind::Quadratic {
                matrix: vec![vec![1.0, 0.0], vec![0.0, 1.0]],
                linear: vec![],
                time: 0.0,
                offset: -1.0,
            }],
            vec![],
        )],
    )
}

pub fn unit_disk() -> PiecewiseDomain {
    build(unit_disk_spec())
}

/// `{x ≤ 1}` in R¹.
pub fn half_line_spec() -> DomainSpec {
    spec(
        1,
        vec![piece(
            "half-line",
            vec![ConstraintKind::affine(vec![1.0], 0.0, -1.0)],
            vec![],
        )],
    )
}

pub fn half_line() -> PiecewiseDomain {
    build(half_line_spec())
}

/// `{x ≤ t}` in R¹.
pub fn moving_wall_spec() -> DomainSpec {
    spec(
        1,
        vec![piece(
            "wall",
            vec![ConstraintKind::affine(vec![1.0], -1.0, 0.0)],
            vec![],
        )],
    )
}

pub fn moving_wall() -> PiecewiseDomain {
    build(moving_wall_spec())
}

/// `{x₂ ≤ 0}` in R².
pub fn half_plane_spec() -> DomainSpec {
    spec(
        2,
        vec![piece(
            "half-plane",
            vec![ConstraintKind::affine(vec![0.0, 1.0], 0.0, 0.0)],
            vec![],
        )],
    )
}

pub fn half_plane() -> PiecewiseDomain {
    build(half_plane_spec())
}

/// Parameters of the two-bus system with a reactive-power-limited generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoBusParams {
    pub q_min: f64,
    pub q_max: f64,
    pub load: LoadProfile,
    pub p_ref: f64,
}

impl Default for TwoBusParams {
    fn default() -> Self {
        // q_max is tight enough that the ramp saturates the generator before t = 1
        Self {
            q_min: -0.3,
            q_max: 0.05,
            load: LoadProfile::ramp(0.0, 0.0, 1.0, 0.8),
            p_ref: 0.2,
        }
    }
}

impl TwoBusParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.q_min < self.q_max) {
            return Err(Error::InvalidArgument(format!(
                "q_min {} must be below q_max {}",
                self.q_min, self.q_max
            )));
        }
        self.load.validate()
    }
}

/// State `x = (p_G, q_G, v, θ₂)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PowerFlowState {
    pub p_g: f64,
    pub q_g: f64,
    pub v: f64,
    pub theta: f64,
}

impl PowerFlowState {
    pub const FLAT_START: Self = Self {
        p_g: 0.0,
        q_g: 0.0,
        v: 1.0,
        theta: 0.0,
    };

    pub fn from_slice(x: &[f64]) -> Self {
        Self {
            p_g: x[0],
            q_g: x[1],
            v: x[2],
            theta: x[3],
        }
    }

    pub fn to_vec(self) -> Vec<f64> {
        vec![self.p_g, self.q_g, self.v, self.theta]
    }

    /// The state satisfying both power-flow equations at voltage `v`, angle `theta` and load `p_l`.
    pub fn balanced(v: f64, theta: f64, p_l: f64) -> Self {
        Self {
            p_g: p_l + v * theta.sin(),
            q_g: v * v - v * theta.cos(),
            v,
            theta,
        }
    }

    /// `(p_G − p_L(t) − v sin θ₂, q_G + v cos θ₂ − v²)`
    pub fn residual(&self, params: &TwoBusParams, t: f64) -> [f64; 2] {
        [
            self.p_g - params.load.value(t) - self.v * self.theta.sin(),
            self.q_g + self.v * self.theta.cos() - self.v * self.v,
        ]
    }
}

/// Indices of the regimes in [`two_bus_domain`].
pub const REGIME_X1: usize = 0;
pub const REGIME_X2: usize = 1;
pub const REGIME_X3: usize = 2;

pub fn two_bus_spec(params: &TwoBusParams) -> DomainSpec {
    let aff = ConstraintKind::affine;
    let flow = || {
        vec![
            ConstraintKind::PowerFlowActive {
                load: params.load.clone(),
                indices: [0, 1, 2, 3],
            },
            ConstraintKind::PowerFlowReactive {
                indices: [0, 1, 2, 3],
            },
        ]
    };
    let with = |extra: ConstraintKind| {
        let mut eq = flow();
        eq.push(extra);
        eq
    };
    let q = |s: f64| vec![0.0, s, 0.0, 0.0];
    let v = |s: f64| vec![0.0, 0.0, s, 0.0];
    spec(
        4,
        vec![
            piece(
                "X1",
                vec![
                    aff(q(1.0), 0.0, -params.q_max),
                    aff(q(-1.0), 0.0, params.q_min),
                ],
                with(aff(v(1.0), 0.0, -1.0)),
            ),
            piece(
                "X2",
                vec![aff(v(-1.0), 0.0, 1.0)],
                with(aff(q(1.0), 0.0, -params.q_min)),
            ),
            piece(
                "X3",
                vec![aff(v(1.0), 0.0, -1.0)],
                with(aff(q(1.0), 0.0, -params.q_max)),
            ),
        ],
    )
}

pub fn two_bus_domain(params: &TwoBusParams) -> PiecewiseDomain {
    build(two_bus_spec(params))
}

pub fn default_feedback_field_spec(params: &TwoBusParams) -> FieldSpec {
    FieldSpec::Feedback {
        dimension: 4,
        index: 0,
        target: params.p_ref,
    }
}

/// `f(x) = (−(p_G − p_ref), 0, 0, 0)`
pub fn default_feedback_field(params: &TwoBusParams) -> VectorField {
    default_feedback_field_spec(params)
        .build()
        .expect("feedback field is well formed")
}

/// Names accepted by [`Scenario::by_name`].
pub const SCENARIO_NAMES: &[&str] = &[
    "wedge",
    "parabola",
    "two-bus",
    "half-line",
    "moving-wall",
    "unit-disk",
    "half-plane",
    "wedge-flow",
];

/// A domain plus everything needed to simulate on it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    pub domain: DomainSpec,
    pub field: FieldSpec,
    pub x0: Vec<f64>,
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
}

impl Scenario {
    pub fn by_name(name: &str) -> Result<Self> {
        let zero = |n| FieldSpec::Zero { dimension: n };
        let make = |domain: DomainSpec, field, x0: Vec<f64>, t_end| Self {
            name: name.to_string(),
            domain,
            field,
            x0,
            t0: 0.0,
            t_end,
            dt: 1e-3,
            scheme: Scheme::CatchingUp,
        };
        Ok(match name {
            "wedge" => make(wedge_spec(), zero(2), vec![0.0, 0.0], 1.0),
            "parabola" => make(parabola_spec(), zero(2), vec![0.0, 0.0], 1.0),
            "two-bus" => return Ok(Self::two_bus(&TwoBusParams::default())),
            "half-line" => make(
                half_line_spec(),
                FieldSpec::Constant { value: vec![1.0] },
                vec![0.0],
                2.0,
            ),
            "moving-wall" => make(
                moving_wall_spec(),
                FieldSpec::Constant { value: vec![2.0] },
                vec![0.0],
                1.0,
            ),
            "unit-disk" => make(
                unit_disk_spec(),
                FieldSpec::Constant {
                    value: vec![1.0, 0.0],
                },
                vec![0.0, 0.0],
                1.0,
            ),
            "half-plane" => make(
                half_plane_spec(),
                FieldSpec::Constant {
                    value: vec![0.0, 1.0],
                },
                vec![0.0, -0.5],
                1.0,
            ),
            "wedge-flow" => make(
                wedge_spec(),
                FieldSpec::Linear {
                    matrix: vec![vec![-1.0, 0.0], vec![0.0, 0.0]],
                    offset: vec![0.0, 0.5],
                },
                vec![1.0, 0.2],
                1.0,
            ),
            other => return Err(Error::UnknownScenario(other.to_string())),
        })
    }

    pub fn two_bus(params: &TwoBusParams) -> Self {
        Self {
            name: "two-bus".into(),
            domain: two_bus_spec(params),
            field: default_feedback_field_spec(params),
            x0: PowerFlowState::FLAT_START.to_vec(),
            t0: 0.0,
            t_end: 1.0,
            dt: 1e-3,
            scheme: Scheme::CatchingUp,
        }
    }

    /// Deep-merges `overrides` into the serialized scenario.
    pub fn with_overrides(&self, overrides: &serde_json::Value) -> Result<Self> {
        let mut base = serde_json::to_value(self).expect("scenario serializes");
        merge(&mut base, overrides);
        serde_json::from_value(base)
            .map_err(|e| Error::InvalidArgument(format!("scenario override: {e}")))
    }

    pub fn build_domain(&self) -> Result<PiecewiseDomain> {
        self.domain.build()
    }

    pub fn build_field(&self) -> Result<VectorField> {
        self.field.build()
    }
}

fn merge(base: &mut serde_json::Value, patch: &serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k.clone()).or_insert(serde_json::Value::Null), v);
            }
        }
        (b, p) => *b = p.clone(),
    }
}
