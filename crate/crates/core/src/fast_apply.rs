//! Applying `[C; A]`, `A`, `C` and the angle derivatives of the stack to a
//! vector straight from the parameters, in `O(nd)` multiplies.
//!
//! Multiplies and fused multiply-adds are counted as one each.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::hoon::{hoon_reconstruct, HoonParams};
use crate::otson::{otson_reconstruct, OtsonParams};
use crate::pair::OutputPair;
use crate::rotations::FlopCounter;

#[derive(Clone, Debug, PartialEq)]
pub enum StackParams {
    Otson(OtsonParams),
    Hoon(HoonParams),
}

impl From<OtsonParams> for StackParams {
    fn from(p: OtsonParams) -> Self {
        StackParams::Otson(p)
    }
}

impl From<HoonParams> for StackParams {
    fn from(p: HoonParams) -> Self {
        StackParams::Hoon(p)
    }
}

/// Which parameter to differentiate by. Stages and angles are 0-based;
/// for HOON, stage `n−1` is the last factor with `d−1` angles.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ParamIndex {
    Angle { stage: usize, index: usize },
    Gamma,
}

/// Result of one implicit application.
#[derive(Clone, Debug, PartialEq)]
pub struct Applied {
    pub value: DVector<f64>,
    pub mults: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ImplicitStack {
    params: StackParams,
}

impl ImplicitStack {
    pub fn new(params: impl Into<StackParams>) -> Self {
        Self { params: params.into() }
    }

    pub fn params(&self) -> &StackParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        match &self.params {
            StackParams::Otson(p) => p.n(),
            StackParams::Hoon(p) => p.n(),
        }
    }

    pub fn d(&self) -> usize {
        match &self.params {
            StackParams::Otson(p) => p.d(),
            StackParams::Hoon(p) => p.d(),
        }
    }

    /// Every differentiable parameter, in flattened order (`γ` first for HOON).
    pub fn param_indices(&self) -> Vec<ParamIndex> {
        let mut out = Vec::new();
        match &self.params {
            StackParams::Otson(p) => {
                for (k, s) in p.stages().iter().enumerate() {
                    out.extend((0..s.thetas().len()).map(|i| ParamIndex::Angle { stage: k, index: i }));
                }
            }
            StackParams::Hoon(p) => {
                out.push(ParamIndex::Gamma);
                for (k, s) in p.stages().iter().chain(std::iter::once(p.last())).enumerate() {
                    out.extend((0..s.thetas().len()).map(|i| ParamIndex::Angle { stage: k, index: i }));
                }
            }
        }
        out
    }

    fn check_len(&self, v: &DVector<f64>) -> Result<()> {
        if v.len() != self.n() {
            return Err(Error::Dimension(format!("vector has length {}, state dimension is {}", v.len(), self.n())));
        }
        Ok(())
    }
}

/// Copy of the parameters with one of them moved by `delta`, skipping
/// domain checks so that central differences work at the domain edge.
pub fn shifted_params(s: &ImplicitStack, which: ParamIndex, delta: f64) -> Result<ImplicitStack> {
    let mut params = s.params.clone();
    match (&mut params, which) {
        (StackParams::Otson(p), ParamIndex::Angle { stage, index }) => {
            let st = p.stages_mut().get_mut(stage).ok_or_else(|| Error::Index(format!("no stage {stage}")))?;
            *st = st.shifted(index, delta)?;
        }
        (StackParams::Hoon(p), ParamIndex::Angle { stage, index }) => {
            let st = p.stage_mut(stage).ok_or_else(|| Error::Index(format!("no stage {stage}")))?;
            *st = st.shifted(index, delta)?;
        }
        (StackParams::Hoon(p), ParamIndex::Gamma) => {
            let g = p.gamma() + delta;
            if !(-1.0..1.0).contains(&g) {
                return Err(Error::Domain(format!("gamma shift leaves (-1, 1): {g}")));
            }
            p.set_gamma_unchecked(g);
        }
        (StackParams::Otson(_), ParamIndex::Gamma) => {
            return Err(Error::Index("OTSON parameters have no gamma".into()));
        }
    }
    Ok(ImplicitStack { params })
}

/// Largest deviation between the analytic derivative and a central
/// difference with step `h`, over all parameters, for one vector `v`.
pub fn gradient_check(s: &ImplicitStack, v: &DVector<f64>, h: f64) -> Result<Vec<(ParamIndex, f64)>> {
    let mut out = Vec::new();
    for which in s.param_indices() {
        let g = stack_matvec_grad(s, v, which)?.value;
        let plus = stack_matvec(&shifted_params(s, which, h)?, v)?.value;
        let minus = stack_matvec(&shifted_params(s, which, -h)?, v)?.value;
        let fd = (plus - minus) / (2.0 * h);
        out.push((which, (g - fd).amax()));
    }
    Ok(out)
}

/// `[C; A] v`.
pub fn stack_matvec(s: &ImplicitStack, v: &DVector<f64>) -> Result<Applied> {
    s.check_len(v)?;
    let mut counter = FlopCounter::new();
    let value = match &s.params {
        StackParams::Otson(p) => otson_apply(p, v, None, &mut counter)?,
        StackParams::Hoon(p) => hoon_apply(p, v, None, &mut counter)?,
    };
    Ok(Applied { value, mults: counter.count() })
}

/// `∂[C; A]/∂p · v` for a single parameter `p`.
pub fn stack_matvec_grad(s: &ImplicitStack, v: &DVector<f64>, which: ParamIndex) -> Result<Applied> {
    s.check_len(v)?;
    let mut counter = FlopCounter::new();
    let value = match &s.params {
        StackParams::Otson(p) => match which {
            ParamIndex::Angle { stage, index } => otson_apply(p, v, Some((stage, index)), &mut counter)?,
            ParamIndex::Gamma => return Err(Error::Index("OTSON parameters have no gamma".into())),
        },
        StackParams::Hoon(p) => match which {
            ParamIndex::Angle { stage, index } => hoon_apply(p, v, Some((stage, index)), &mut counter)?,
            ParamIndex::Gamma => hoon_gamma_grad(p, v, &mut counter),
        },
    };
    Ok(Applied { value, mults: counter.count() })
}

/// `A v`.
pub fn advance_matvec(s: &ImplicitStack, v: &DVector<f64>) -> Result<Applied> {
    let full = stack_matvec(s, v)?;
    let d = s.d();
    Ok(Applied { value: full.value.rows(d, s.n()).into_owned(), mults: full.mults })
}

/// `C v`.
pub fn measure_matvec(s: &ImplicitStack, v: &DVector<f64>) -> Result<Applied> {
    let full = stack_matvec(s, v)?;
    Ok(Applied { value: full.value.rows(0, s.d()).into_owned(), mults: full.mults })
}

/// Dense pair, through the recurrence reconstruction.
pub fn materialize(s: &ImplicitStack) -> Result<OutputPair> {
    match &s.params {
        StackParams::Otson(p) => otson_reconstruct(p),
        StackParams::Hoon(p) => hoon_reconstruct(p),
    }
}

fn check_angle(len: usize, stages: usize, stage: usize, index: usize) -> Result<()> {
    if stage >= stages || index >= len {
        return Err(Error::Index(format!("no angle ({stage}, {index}) in this parameter set")));
    }
    Ok(())
}

// w = [v; 0], then Q⁽¹⁾, …, Q⁽ⁿ⁾.
fn otson_apply(
    p: &OtsonParams,
    v: &DVector<f64>,
    deriv: Option<(usize, usize)>,
    counter: &mut FlopCounter,
) -> Result<DVector<f64>> {
    let (n, d) = (p.n(), p.d());
    if let Some((stage, index)) = deriv {
        check_angle(d, n, stage, index)?;
    }
    let mut w = vec![0.0; n + d];
    w[..n].copy_from_slice(v.as_slice());
    for (k, stage) in p.stages().iter().enumerate() {
        let coords = p.coords(k);
        match deriv {
            Some((ks, i)) if ks == k => stage.apply_embedded_derivative(&mut w, &coords, i, counter)?,
            _ => stage.apply_embedded(&mut w, &coords, false, counter),
        }
    }
    Ok(DVector::from_vec(w))
}

// w = [0; P(γ) v] with the sign folded in, then V⁽ⁿ⁾, …, V⁽¹⁾; C₁ v in front.
fn hoon_apply(
    p: &HoonParams,
    v: &DVector<f64>,
    deriv: Option<(usize, usize)>,
    counter: &mut FlopCounter,
) -> Result<DVector<f64>> {
    let (n, d) = (p.n(), p.d());
    if let Some((stage, index)) = deriv {
        let len = if stage + 1 == n { d - 1 } else { d };
        check_angle(len, n, stage, index)?;
    }
    let mut w = vec![0.0; n + d - 1];
    w[d - 1] = p.final_sign() * v[n - 1];
    w[d] = p.gamma() * v[0];
    w[d + 1..].copy_from_slice(&v.as_slice()[1..n - 1]);
    counter.add(2);
    let last_coords: Vec<usize> = (0..d).collect();
    match deriv {
        Some((ks, i)) if ks == n - 1 => p.last().apply_embedded_derivative(&mut w, &last_coords, i, counter)?,
        _ => p.last().apply_embedded(&mut w, &last_coords, false, counter),
    }
    for (k, stage) in p.stages().iter().enumerate().rev() {
        let coords = p.coords(k);
        match deriv {
            Some((ks, i)) if ks == k => stage.apply_embedded_derivative(&mut w, &coords, i, counter)?,
            _ => stage.apply_embedded(&mut w, &coords, false, counter),
        }
    }
    let mut out = DVector::zeros(n + d);
    out[0] = if deriv.is_some() { 0.0 } else { p.c11() * v[0] };
    counter.add(1);
    out.rows_mut(1, n + d - 1).copy_from_slice(&w);
    Ok(out)
}

fn hoon_gamma_grad(p: &HoonParams, v: &DVector<f64>, counter: &mut FlopCounter) -> DVector<f64> {
    let (n, d) = (p.n(), p.d());
    let mut w = vec![0.0; n + d - 1];
    w[d] = v[0];
    let last_coords: Vec<usize> = (0..d).collect();
    p.last().apply_embedded(&mut w, &last_coords, false, counter);
    for (k, stage) in p.stages().iter().enumerate().rev() {
        stage.apply_embedded(&mut w, &p.coords(k), false, counter);
    }
    let mut out = DVector::zeros(n + d);
    out[0] = -p.gamma() / p.c11() * v[0];
    counter.add(2);
    out.rows_mut(1, n + d - 1).copy_from_slice(&w);
    out
}
