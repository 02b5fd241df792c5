//! Latency and energy of a training run under a simple wireless edge model.
//!
//! Local computation: `T = cD/f`, `E = (α/2)cDf²`. Client-to-edge upload:
//! `T = M / (B_w log₂(1 + gp/σ))`, `E = pT`. The edge-to-cloud hop takes a
//! fixed multiple of the client upload latency.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierfavg::TraceRecord;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostParams {
    /// CPU cycles per bit, `c`.
    pub cycles_per_bit: f64,
    /// CPU frequency `f` in Hz.
    pub cpu_freq: f64,
    /// Effective switched capacitance `α`.
    pub capacitance: f64,
    /// Transmit power `p` in W.
    pub tx_power: f64,
    /// Noise power `σ` in W.
    pub noise_power: f64,
    /// Channel bandwidth `B_w` in Hz.
    pub bandwidth: f64,
    /// Channel gain `g`.
    pub channel_gain: f64,
    /// Model size `M` in bits.
    pub model_bits: f64,
    /// Data processed per local iteration `D` in bits.
    pub data_bits_per_iteration: f64,
    pub cloud_latency_multiplier: f64,
}

impl Default for CostParams {
    fn default() -> Self {
        Self::mnist()
    }
}

impl CostParams {
    /// MNIST setting: 21840 single-precision parameters, 1.2e6 bits per iteration.
    pub fn mnist() -> Self {
        Self {
            cycles_per_bit: 20.0,
            cpu_freq: 1e9,
            capacitance: 2e-28,
            tx_power: 0.5,
            noise_power: 1e-10,
            bandwidth: 1e6,
            channel_gain: 1e-8,
            model_bits: 21840.0 * 32.0,
            data_bits_per_iteration: 1.2e6,
            cloud_latency_multiplier: 10.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("cycles_per_bit", self.cycles_per_bit),
            ("cpu_freq", self.cpu_freq),
            ("capacitance", self.capacitance),
            ("tx_power", self.tx_power),
            ("noise_power", self.noise_power),
            ("bandwidth", self.bandwidth),
            ("channel_gain", self.channel_gain),
            ("model_bits", self.model_bits),
            ("data_bits_per_iteration", self.data_bits_per_iteration),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::config(format!("cost parameter {name} must be positive, got {v}")));
            }
        }
        if !(self.cloud_latency_multiplier >= 1.0 && self.cloud_latency_multiplier.is_finite()) {
            return Err(Error::config("cloud_latency_multiplier must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitCosts {
    pub t_comp: f64,
    pub e_comp: f64,
    pub t_comm_edge: f64,
    pub e_comm_edge: f64,
    pub t_comm_cloud: f64,
}

pub fn unit_costs(params: &CostParams) -> Result<UnitCosts> {
    params.validate()?;
    let cycles = params.cycles_per_bit * params.data_bits_per_iteration;
    let rate = params.bandwidth * (1.0 + params.channel_gain * params.tx_power / params.noise_power).log2();
    let t_comm_edge = params.model_bits / rate;
    Ok(UnitCosts {
        t_comp: cycles / params.cpu_freq,
        e_comp: params.capacitance / 2.0 * cycles * params.cpu_freq * params.cpu_freq,
        t_comm_edge,
        e_comm_edge: params.tx_power * t_comm_edge,
        t_comm_cloud: params.cloud_latency_multiplier * t_comm_edge,
    })
}

/// Who pays for energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnergyScope {
    /// One client's computation and edge uploads.
    #[default]
    PerClient,
    /// Every client, plus each edge's upload to the cloud at power `p`.
    Fleet,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Accounting {
    pub kappa1: usize,
    pub kappa2: usize,
    pub scope: EnergyScope,
    pub clients: usize,
    pub edges: usize,
}

impl Accounting {
    pub fn per_client(kappa1: usize, kappa2: usize) -> Self {
        Self { kappa1, kappa2, scope: EnergyScope::PerClient, clients: 1, edges: 1 }
    }

    fn validate(&self) -> Result<()> {
        if self.kappa1 == 0 || self.kappa2 == 0 || self.clients == 0 || self.edges == 0 {
            return Err(Error::config("accounting needs positive periods and entity counts"));
        }
        Ok(())
    }
}

/// Cost of updates `(from, to]`.
fn cost_between(units: &UnitCosts, acc: &Accounting, from: usize, to: usize) -> (f64, f64) {
    let steps = (to - from) as f64;
    let edge = (to / acc.kappa1 - from / acc.kappa1) as f64;
    let period = acc.kappa1 * acc.kappa2;
    let cloud = (to / period - from / period) as f64;
    let seconds = steps * units.t_comp + edge * units.t_comm_edge + cloud * units.t_comm_cloud;
    let client_joules = steps * units.e_comp + edge * units.e_comm_edge;
    let joules = match acc.scope {
        EnergyScope::PerClient => client_joules,
        EnergyScope::Fleet => {
            // each edge uploads to the cloud at power p = E_edge / T_edge
            let p = units.e_comm_edge / units.t_comm_edge;
            acc.clients as f64 * client_joules + cloud * acc.edges as f64 * p * units.t_comm_cloud
        }
    };
    (seconds, joules)
}

/// Latency of one cloud round: `κ1κ2 T_comp + κ2 T_edge + T_cloud`.
pub fn per_round_latency(units: &UnitCosts, kappa1: usize, kappa2: usize) -> f64 {
    cost_between(units, &Accounting::per_client(kappa1, kappa2), 0, kappa1 * kappa2).0
}

/// One client's energy per cloud round: `κ1κ2 E_comp + κ2 E_edge`.
pub fn per_round_client_energy(units: &UnitCosts, kappa1: usize, kappa2: usize) -> f64 {
    cost_between(units, &Accounting::per_client(kappa1, kappa2), 0, kappa1 * kappa2).1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccuracyPoint {
    pub k: usize,
    pub accuracy: f64,
}

impl<T: Scalar> From<&TraceRecord<T>> for AccuracyPoint {
    fn from(r: &TraceRecord<T>) -> Self {
        Self { k: r.k, accuracy: r.test_accuracy.as_f64() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostPoint {
    pub k: usize,
    pub seconds: f64,
    pub joules: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AlphaCost {
    pub alpha: f64,
    /// `(k, T_α, E_α)` at the first point reaching `α`; `None` if never reached.
    pub reached: Option<(usize, f64, f64)>,
}

impl AlphaCost {
    pub fn t_alpha(&self) -> Option<f64> {
        self.reached.map(|r| r.1)
    }

    pub fn e_alpha(&self) -> Option<f64> {
        self.reached.map(|r| r.2)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CostReport {
    pub per_round_latency: f64,
    pub per_round_client_energy: f64,
    pub points: Vec<CostPoint>,
    pub alphas: Vec<AlphaCost>,
}

/// Cumulative time and energy at every trace point, and `T_α`, `E_α` for
/// each requested accuracy level.
pub fn accumulate(
    trace: &[AccuracyPoint],
    accounting: &Accounting,
    params: &CostParams,
    alphas: &[f64],
) -> Result<CostReport> {
    accounting.validate()?;
    let units = unit_costs(params)?;
    if trace.windows(2).any(|w| w[0].k >= w[1].k) {
        return Err(Error::domain("trace points must be strictly ordered by k"));
    }
    let mut points = Vec::with_capacity(trace.len());
    let (mut k, mut seconds, mut joules) = (0usize, 0.0, 0.0);
    for p in trace {
        let (dt, de) = cost_between(&units, accounting, k, p.k);
        seconds += dt;
        joules += de;
        k = p.k;
        points.push(CostPoint { k, seconds, joules, accuracy: p.accuracy });
    }
    let alphas = alphas
        .iter()
        .map(|&alpha| AlphaCost {
            alpha,
            reached: points.iter().find(|p| p.accuracy >= alpha).map(|p| (p.k, p.seconds, p.joules)),
        })
        .collect();
    Ok(CostReport {
        per_round_latency: per_round_latency(&units, accounting.kappa1, accounting.kappa2),
        per_round_client_energy: per_round_client_energy(&units, accounting.kappa1, accounting.kappa2),
        points,
        alphas,
    })
}

impl CostReport {
    /// Structured text summary, one `alpha` line per requested level.
    pub fn write_summary<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "per_round_latency_s {}", self.per_round_latency)?;
        writeln!(out, "per_round_client_energy_j {}", self.per_round_client_energy)?;
        for a in &self.alphas {
            match a.reached {
                Some((k, t, e)) => writeln!(out, "alpha {} reached k={k} t_alpha_s={t} e_alpha_j={e}", a.alpha)?,
                None => writeln!(out, "alpha {} not_reached", a.alpha)?,
            }
        }
        Ok(())
    }
}
