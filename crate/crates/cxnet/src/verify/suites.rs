//! Oracle suites: each one checks a production code path against an
//! independent reference (finite differences, naive loops, brute-force
//! sweeps) and reports the worst observed error.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::autograd::{CVar, ParamStore, Tape, Value, Var};
use crate::ctensor::{dft2d, ComplexTensor, Tensor};
use crate::error::Result;
use crate::layers::{
    cl2_norm, complex_pool2, crelu, BnMode, ComplexBatchNorm, ComplexConv2d, ComplexLinear,
    ComplexResidualBlock, InitScheme,
};
use crate::objectives::{
    complex_distance, fpr95, mse_loss_graph, softpn_from_distances, softpn_loss_graph, DistanceMode,
    LossForm, Polarity,
};

use super::fd::{check_gradient, FdReport, FD_EPS, FD_TOL};
use super::oracles;

#[derive(Debug, Clone)]
pub struct SuiteReport {
    pub name: &'static str,
    pub cases: usize,
    pub max_err: f64,
    pub passed: bool,
    pub note: String,
}

impl SuiteReport {
    pub fn line(&self) -> String {
        format!(
            "[{}] {}: {} cases, max err {:.3e}{}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.cases,
            self.max_err,
            if self.note.is_empty() { String::new() } else { format!(" ({})", self.note) }
        )
    }
}

pub fn run_all(seed: u64) -> Vec<SuiteReport> {
    vec![
        run_gradient_suite(seed),
        run_conv_structural_suite(seed ^ 0x11),
        run_bn_suite(seed ^ 0x22),
        run_loss_distance_suite(seed ^ 0x33),
        run_fpr95_suite(seed ^ 0x44),
        run_dft_suite(seed ^ 0x55),
    ]
}

// ---- shared generators ----

fn rand_t<R: Rng>(rng: &mut R, dims: Vec<usize>, lo: f64, hi: f64) -> Tensor {
    let n: usize = dims.iter().product();
    let data = (0..n).map(|_| rng.gen_range(lo..hi)).collect();
    Tensor::from_vec(dims, data).unwrap()
}

/// Random tensor with every |value| >= margin (for relu-style kinks).
fn rand_away<R: Rng>(rng: &mut R, dims: Vec<usize>, margin: f64) -> Tensor {
    let n: usize = dims.iter().product();
    let data = (0..n)
        .map(|_| {
            let mag = rng.gen_range(margin..1.0);
            if rng.gen::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect();
    Tensor::from_vec(dims, data).unwrap()
}

/// Distinct values per position so max-pool windows have no near-ties.
fn rand_distinct<R: Rng>(rng: &mut R, dims: Vec<usize>) -> Tensor {
    let n: usize = dims.iter().product();
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let data = order.iter().map(|&r| r as f64 * 0.05 + rng.gen_range(-0.01..0.01)).collect();
    Tensor::from_vec(dims, data).unwrap()
}

/// Fixed projection tensor turning an arbitrary output into a scalar loss.
fn projection(dims: &[usize]) -> Tensor {
    Tensor::from_fn(dims.to_vec(), |i| 0.3 + ((i * 37) % 7) as f64 * 0.11 - 0.3 * ((i % 3) as f64))
}

/// loss = sum(out * projection), as a tape subgraph.
fn project_loss(tape: &mut Tape, out: Var) -> Result<Var> {
    let proj = projection(tape.value(out).dims());
    let p = tape.leaf(proj);
    let weighted = tape.mul(out, p)?;
    Ok(tape.sum_all(weighted))
}

fn project_loss_pair(tape: &mut Tape, out: CVar) -> Result<Var> {
    let lr = project_loss(tape, out.re)?;
    let li = project_loss(tape, out.im)?;
    tape.add(lr, li)
}

fn grad_or_zeros(grads: &crate::autograd::Grads, v: Var, like: &Tensor) -> Tensor {
    grads
        .get(v)
        .cloned()
        .unwrap_or_else(|| Tensor::zeros(like.dims().to_vec()))
}

fn param_grad(store: &ParamStore, name: &str) -> (Tensor, Tensor) {
    match &store.get(name).unwrap().grad {
        Value::Real(t) => (t.clone(), Tensor::zeros(vec![1])),
        Value::Complex(c) => (c.re().clone(), c.im().clone()),
    }
}

// ---- gradient suite ----

const SHAPES_PER_OP: usize = 20;

struct GradSuite {
    report: FdReport,
    checks: usize,
    failures: Vec<String>,
}

impl GradSuite {
    fn push(&mut self, name: &str, r: FdReport) {
        if !r.passed(FD_TOL) {
            self.failures.push(format!("{name}: {:.3e}", r.max_rel_err));
        }
        self.report.merge(r);
        self.checks += 1;
    }
}

pub fn run_gradient_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut suite = GradSuite { report: FdReport::default(), checks: 0, failures: Vec::new() };

    // Primitive elementwise and reduction ops on small random shapes.
    type Builder = fn(&mut Tape, &[Var]) -> Result<Var>;
    let unary_cases: Vec<(&str, Builder, fn(&mut ChaCha12Rng, Vec<usize>) -> Tensor)> = vec![
        ("neg", |t, v| Ok(t.neg(v[0])), |r, d| rand_t(r, d, -1.0, 1.0)),
        ("relu", |t, v| Ok(t.relu(v[0])), |r, d| rand_away(r, d, 0.05)),
        ("sigmoid", |t, v| Ok(t.sigmoid(v[0])), |r, d| rand_t(r, d, -2.0, 2.0)),
        ("sqrt", |t, v| Ok(t.sqrt(v[0])), |r, d| rand_t(r, d, 0.25, 4.0)),
        ("square", |t, v| Ok(t.square(v[0])), |r, d| rand_t(r, d, -1.5, 1.5)),
        ("recip", |t, v| Ok(t.recip(v[0])), |r, d| rand_away(r, d, 0.3)),
        ("add_const", |t, v| Ok(t.add_const(v[0], 0.7)), |r, d| rand_t(r, d, -1.0, 1.0)),
        ("mul_const", |t, v| Ok(t.mul_const(v[0], -1.3)), |r, d| rand_t(r, d, -1.0, 1.0)),
        ("sum_all", |t, v| Ok(t.sum_all(v[0])), |r, d| rand_t(r, d, -1.0, 1.0)),
        ("mean_all", |t, v| Ok(t.mean_all(v[0])), |r, d| rand_t(r, d, -1.0, 1.0)),
    ];
    for (name, build, gen) in unary_cases {
        let mut merged = FdReport::default();
        for _ in 0..SHAPES_PER_OP {
            let dims = vec![rng.gen_range(1..3), rng.gen_range(2..7)];
            let input = gen(&mut rng, dims);
            let r = check_gradient(
                |ins| {
                    let mut tape = Tape::new();
                    let x = tape.leaf_grad(ins[0].clone());
                    let out = build(&mut tape, &[x])?;
                    let loss = if tape.value(out).numel() == 1 { out } else { project_loss(&mut tape, out)? };
                    let grads = tape.backward(loss)?;
                    Ok((tape.value(loss).item()?, vec![grad_or_zeros(&grads, x, &ins[0])]))
                },
                &[input],
                FD_EPS,
            )
            .unwrap();
            merged.merge(r);
        }
        suite.push(name, merged);
    }

    let binary_cases: Vec<(&str, Builder)> = vec![
        ("add", |t, v| t.add(v[0], v[1])),
        ("sub", |t, v| t.sub(v[0], v[1])),
        ("mul", |t, v| t.mul(v[0], v[1])),
        ("min_elem", |t, v| t.min_elem(v[0], v[1])),
    ];
    for (name, build) in binary_cases {
        let mut merged = FdReport::default();
        for _ in 0..SHAPES_PER_OP {
            let dims = vec![rng.gen_range(1..3), rng.gen_range(2..7)];
            let a = rand_t(&mut rng, dims.clone(), -1.0, 1.0);
            // Keep |a-b| away from the min_elem tie.
            let gap = rand_away(&mut rng, dims.clone(), 0.05);
            let b = a.zip_map(&gap, |x, g| x + g).unwrap();
            let r = check_gradient(
                |ins| {
                    let mut tape = Tape::new();
                    let x = tape.leaf_grad(ins[0].clone());
                    let y = tape.leaf_grad(ins[1].clone());
                    let out = build(&mut tape, &[x, y])?;
                    let loss = project_loss(&mut tape, out)?;
                    let grads = tape.backward(loss)?;
                    Ok((
                        tape.value(loss).item()?,
                        vec![grad_or_zeros(&grads, x, &ins[0]), grad_or_zeros(&grads, y, &ins[1])],
                    ))
                },
                &[a, b],
                FD_EPS,
            )
            .unwrap();
            merged.merge(r);
        }
        suite.push(name, merged);
    }

    // Shape and broadcast ops.
    suite.push("rows_channels", {
        let mut merged = FdReport::default();
        for _ in 0..SHAPES_PER_OP {
            let (n, c, h, w) = (rng.gen_range(1..3), rng.gen_range(1..4), rng.gen_range(2..5), rng.gen_range(2..5));
            let x = rand_t(&mut rng, vec![n, c, h, w], -1.0, 1.0);
            let s = rand_t(&mut rng, vec![c], 0.5, 1.5);
            let r = check_gradient(
                |ins| {
                    let mut tape = Tape::new();
                    let xv = tape.leaf_grad(ins[0].clone());
                    let sv = tape.leaf_grad(ins[1].clone());
                    let scaled = tape.scale_channels(xv, sv)?;
                    let shifted = tape.shift_channels(scaled, sv)?;
                    let mu = tape.mean_channels(shifted)?;
                    let flatd = tape.reshape(shifted, vec![ins[0].dims()[0], ins[0].numel() / ins[0].dims()[0]])?;
                    let rows = tape.sum_rows(flatd)?;
                    let l1 = project_loss(&mut tape, mu)?;
                    let l2 = project_loss(&mut tape, rows)?;
                    let loss = tape.add(l1, l2)?;
                    let grads = tape.backward(loss)?;
                    Ok((
                        tape.value(loss).item()?,
                        vec![grad_or_zeros(&grads, xv, &ins[0]), grad_or_zeros(&grads, sv, &ins[1])],
                    ))
                },
                &[x, s],
                FD_EPS,
            )
            .unwrap();
            merged.merge(r);
        }
        merged
    });

    suite.push("linear_bias_concat_slice", {
        let mut merged = FdReport::default();
        for _ in 0..SHAPES_PER_OP {
            let (n, k, m) = (rng.gen_range(2..4), rng.gen_range(2..5), rng.gen_range(1..4));
            let x = rand_t(&mut rng, vec![n, k], -1.0, 1.0);
            let w = rand_t(&mut rng, vec![m, k], -1.0, 1.0);
            let b = rand_t(&mut rng, vec![m], -0.5, 0.5);
            let s = rand_t(&mut rng, vec![n], 0.5, 1.5);
            let r = check_gradient(
                |ins| {
                    let mut tape = Tape::new();
                    let xv = tape.leaf_grad(ins[0].clone());
                    let wv = tape.leaf_grad(ins[1].clone());
                    let bv = tape.leaf_grad(ins[2].clone());
                    let sv = tape.leaf_grad(ins[3].clone());
                    let y = tape.linear(xv, wv)?;
                    let y = tape.add_bias_row(y, bv)?;
                    let y = tape.scale_rows(y, sv)?;
                    let cat = tape.concat_cols(y, y)?;
                    let n_rows = ins[0].dims()[0];
                    let upper = tape.slice_rows(cat, 0, n_rows.div_ceil(2))?;
                    let loss = project_loss(&mut tape, upper)?;
                    let grads = tape.backward(loss)?;
                    Ok((
                        tape.value(loss).item()?,
                        vec![
                            grad_or_zeros(&grads, xv, &ins[0]),
                            grad_or_zeros(&grads, wv, &ins[1]),
                            grad_or_zeros(&grads, bv, &ins[2]),
                            grad_or_zeros(&grads, sv, &ins[3]),
                        ],
                    ))
                },
                &[x, w, b, s],
                FD_EPS,
            )
            .unwrap();
            merged.merge(r);
        }
        merged
    });

    suite.push("conv2d", {
        let mut merged = FdReport::default();
        for _ in 0..SHAPES_PER_OP {
            let k = if rng.gen::<bool>() { 3 } else { 1 };
            let pad = if k == 3 { 1 } else { 0 };
            let (n, cin, cout) = (rng.gen_range(1..3), rng.gen_range(1..3), rng.gen_range(1..3));
            let (h, w) = (rng.gen_range(3..6), rng.gen_range(3..6));
            let x = rand_t(&mut rng, vec![n, cin, h, w], -1.0, 1.0);
            let wt = rand_t(&mut rng, vec![cout, cin, k, k], -1.0, 1.0);
            let r = check_gradient(
                |ins| {
                    let mut tape = Tape::new();
                    let xv = tape.leaf_grad(ins[0].clone());
                    let wv = tape.leaf_grad(ins[1].clone());
                    let y = tape.conv2d(xv, wv, pad, 1)?;
                    let loss = project_loss(&mut tape, y)?;
                    let grads = tape.backward(loss)?;
                    Ok((
                        tape.value(loss).item()?,
                        vec![grad_or_zeros(&grads, xv, &ins[0]), grad_or_zeros(&grads, wv, &ins[1])],
                    ))
                },
                &[x, wt],
                FD_EPS,
            )
            .unwrap();
            merged.merge(r);
        }
        merged
    });

    suite.push("maxpool2", {
        let mut merged = FdReport::default();
        for _ in 0..SHAPES_PER_OP {
            let dims = vec![rng.gen_range(1..3), rng.gen_range(1..3), 4, 4];
            let x = rand_distinct(&mut rng, dims);
            let r = check_gradient(
                |ins| {
                    let mut tape = Tape::new();
                    let xv = tape.leaf_grad(ins[0].clone());
                    let y = tape.maxpool2(xv)?;
                    let loss = project_loss(&mut tape, y)?;
                    let grads = tape.backward(loss)?;
                    Ok((tape.value(loss).item()?, vec![grad_or_zeros(&grads, xv, &ins[0])]))
                },
                &[x],
                FD_EPS,
            )
            .unwrap();
            merged.merge(r);
        }
        merged
    });

    suite.push("dft2d", {
        let mut merged = FdReport::default();
        for _ in 0..SHAPES_PER_OP {
            let dims = vec![1, rng.gen_range(1..3), rng.gen_range(2..5), rng.gen_range(2..5)];
            let x = rand_t(&mut rng, dims, -1.0, 1.0);
            let r = check_gradient(
                |ins| {
                    let mut tape = Tape::new();
                    let xv = tape.leaf_grad(ins[0].clone());
                    let re = tape.dft2d_re(xv)?;
                    let im = tape.dft2d_im(xv)?;
                    let l1 = project_loss(&mut tape, re)?;
                    let l2 = project_loss(&mut tape, im)?;
                    let loss = tape.add(l1, l2)?;
                    let grads = tape.backward(loss)?;
                    Ok((tape.value(loss).item()?, vec![grad_or_zeros(&grads, xv, &ins[0])]))
                },
                &[x],
                FD_EPS,
            )
            .unwrap();
            merged.merge(r);
        }
        merged
    });

    // Layer composites, exercised through the actual layer code.
    suite.push("complex_conv_layer", complex_conv_fd(&mut rng));
    suite.push("complex_fc_layer", complex_fc_fd(&mut rng));
    suite.push("crelu_pool_cl2", crelu_pool_cl2_fd(&mut rng));
    suite.push("complex_bn_per_component", bn_fd(&mut rng, BnMode::PerComponent));
    suite.push("complex_bn_covariance", bn_fd(&mut rng, BnMode::Covariance));
    suite.push("residual_block", residual_fd(&mut rng));
    suite.push("softpn_loss", softpn_fd(&mut rng));
    suite.push("mse_loss", mse_fd(&mut rng));

    SuiteReport {
        name: "gradient",
        cases: suite.report.coords,
        max_err: suite.report.max_rel_err,
        passed: suite.failures.is_empty(),
        note: if suite.failures.is_empty() {
            format!("{} op families", suite.checks)
        } else {
            suite.failures.join("; ")
        },
    }
}

fn complex_conv_fd(rng: &mut ChaCha12Rng) -> FdReport {
    let mut merged = FdReport::default();
    for _ in 0..SHAPES_PER_OP {
        let k = if rng.gen::<bool>() { 3 } else { 1 };
        let pad = if k == 3 { 1 } else { 0 };
        let (cin, cout) = (rng.gen_range(1..3), rng.gen_range(1..3));
        let (h, w) = (rng.gen_range(3..5), rng.gen_range(3..5));
        let layer = ComplexConv2d::new("l", cin, cout, k, pad).unwrap();
        let xr = rand_t(rng, vec![2, cin, h, w], -1.0, 1.0);
        let xi = rand_t(rng, vec![2, cin, h, w], -1.0, 1.0);
        let a = rand_t(rng, vec![cout, cin, k, k], -1.0, 1.0);
        let b = rand_t(rng, vec![cout, cin, k, k], -1.0, 1.0);
        let br = rand_t(rng, vec![cout], -0.5, 0.5);
        let bi = rand_t(rng, vec![cout], -0.5, 0.5);
        let r = check_gradient(
            |ins| {
                let mut store = ParamStore::new();
                let mut seed_rng = ChaCha12Rng::seed_from_u64(0);
                layer.register(&mut store, InitScheme::GlorotUniform, &mut seed_rng)?;
                store.get_mut("l.A")?.value = Value::Real(ins[2].clone());
                store.get_mut("l.B")?.value = Value::Real(ins[3].clone());
                store.get_mut("l.bias")?.value =
                    Value::Complex(ComplexTensor::new(ins[4].clone(), ins[5].clone())?);
                let mut tape = Tape::new();
                let hvar = CVar { re: tape.leaf_grad(ins[0].clone()), im: tape.leaf_grad(ins[1].clone()) };
                let y = layer.forward(&mut tape, &store, hvar)?;
                let loss = project_loss_pair(&mut tape, y)?;
                let grads = tape.backward(loss)?;
                store.accumulate_grads(&tape, &grads)?;
                let (ga, _) = param_grad(&store, "l.A");
                let (gb, _) = param_grad(&store, "l.B");
                let (gbr, gbi) = param_grad(&store, "l.bias");
                Ok((
                    tape.value(loss).item()?,
                    vec![
                        grad_or_zeros(&grads, hvar.re, &ins[0]),
                        grad_or_zeros(&grads, hvar.im, &ins[1]),
                        ga,
                        gb,
                        gbr,
                        gbi,
                    ],
                ))
            },
            &[xr, xi, a, b, br, bi],
            FD_EPS,
        )
        .unwrap();
        merged.merge(r);
    }
    merged
}

fn complex_fc_fd(rng: &mut ChaCha12Rng) -> FdReport {
    let mut merged = FdReport::default();
    for _ in 0..SHAPES_PER_OP {
        let (din, dout) = (rng.gen_range(2..5), rng.gen_range(1..4));
        let layer = ComplexLinear::new("fc", din, dout);
        let xr = rand_t(rng, vec![2, din], -1.0, 1.0);
        let xi = rand_t(rng, vec![2, din], -1.0, 1.0);
        let a = rand_t(rng, vec![dout, din], -1.0, 1.0);
        let b = rand_t(rng, vec![dout, din], -1.0, 1.0);
        let br = rand_t(rng, vec![dout], -0.5, 0.5);
        let bi = rand_t(rng, vec![dout], -0.5, 0.5);
        let r = check_gradient(
            |ins| {
                let mut store = ParamStore::new();
                let mut seed_rng = ChaCha12Rng::seed_from_u64(0);
                layer.register(&mut store, InitScheme::GlorotUniform, &mut seed_rng)?;
                store.get_mut("fc.A")?.value = Value::Real(ins[2].clone());
                store.get_mut("fc.B")?.value = Value::Real(ins[3].clone());
                store.get_mut("fc.bias")?.value =
                    Value::Complex(ComplexTensor::new(ins[4].clone(), ins[5].clone())?);
                let mut tape = Tape::new();
                let hvar = CVar { re: tape.leaf_grad(ins[0].clone()), im: tape.leaf_grad(ins[1].clone()) };
                let y = layer.forward(&mut tape, &store, hvar)?;
                let loss = project_loss_pair(&mut tape, y)?;
                let grads = tape.backward(loss)?;
                store.accumulate_grads(&tape, &grads)?;
                let (ga, _) = param_grad(&store, "fc.A");
                let (gb, _) = param_grad(&store, "fc.B");
                let (gbr, gbi) = param_grad(&store, "fc.bias");
                Ok((
                    tape.value(loss).item()?,
                    vec![
                        grad_or_zeros(&grads, hvar.re, &ins[0]),
                        grad_or_zeros(&grads, hvar.im, &ins[1]),
                        ga,
                        gb,
                        gbr,
                        gbi,
                    ],
                ))
            },
            &[xr, xi, a, b, br, bi],
            FD_EPS,
        )
        .unwrap();
        merged.merge(r);
    }
    merged
}

fn crelu_pool_cl2_fd(rng: &mut ChaCha12Rng) -> FdReport {
    let mut merged = FdReport::default();
    for _ in 0..SHAPES_PER_OP {
        let c = rng.gen_range(1..3);
        let xr = rand_distinct(rng, vec![2, c, 4, 4]);
        let xi = rand_distinct(rng, vec![2, c, 4, 4]);
        let r = check_gradient(
            |ins| {
                let mut tape = Tape::new();
                let input = CVar { re: tape.leaf_grad(ins[0].clone()), im: tape.leaf_grad(ins[1].clone()) };
                let h = crelu(&mut tape, input);
                let h = complex_pool2(&mut tape, h)?;
                let n = tape.value(h.re).dims()[0];
                let flat = tape.value(h.re).numel() / n;
                let h = CVar {
                    re: tape.reshape(h.re, vec![n, flat])?,
                    im: tape.reshape(h.im, vec![n, flat])?,
                };
                let h = cl2_norm(&mut tape, h)?;
                let loss = project_loss_pair(&mut tape, h)?;
                let grads = tape.backward(loss)?;
                Ok((
                    tape.value(loss).item()?,
                    vec![
                        grad_or_zeros(&grads, input.re, &ins[0]),
                        grad_or_zeros(&grads, input.im, &ins[1]),
                    ],
                ))
            },
            &[xr, xi],
            FD_EPS,
        )
        .unwrap();
        merged.merge(r);
    }
    merged
}

fn bn_fd(rng: &mut ChaCha12Rng, mode: BnMode) -> FdReport {
    let mut merged = FdReport::default();
    for _ in 0..SHAPES_PER_OP {
        let c = rng.gen_range(1..3);
        let bn = ComplexBatchNorm::new("bn", c, mode);
        let xr = rand_t(rng, vec![3, c, 3, 3], -1.0, 1.0);
        let xi = rand_t(rng, vec![3, c, 3, 3], -1.0, 1.0);
        let gr = rand_t(rng, vec![c], 0.5, 1.5);
        let gi = rand_t(rng, vec![c], 0.5, 1.5);
        let befr = rand_t(rng, vec![c], -0.5, 0.5);
        let befi = rand_t(rng, vec![c], -0.5, 0.5);
        let r = check_gradient(
            |ins| {
                let mut store = ParamStore::new();
                bn.register(&mut store)?;
                store.get_mut("bn.gamma_r")?.value = Value::Real(ins[2].clone());
                store.get_mut("bn.gamma_i")?.value = Value::Real(ins[3].clone());
                store.get_mut("bn.beta_r")?.value = Value::Real(ins[4].clone());
                store.get_mut("bn.beta_i")?.value = Value::Real(ins[5].clone());
                let mut tape = Tape::new();
                let h = CVar { re: tape.leaf_grad(ins[0].clone()), im: tape.leaf_grad(ins[1].clone()) };
                let y = bn.forward(&mut tape, &mut store, h, true)?;
                let loss = project_loss_pair(&mut tape, y)?;
                let grads = tape.backward(loss)?;
                store.accumulate_grads(&tape, &grads)?;
                let (ggr, _) = param_grad(&store, "bn.gamma_r");
                let (ggi, _) = param_grad(&store, "bn.gamma_i");
                let (gbr, _) = param_grad(&store, "bn.beta_r");
                let (gbi, _) = param_grad(&store, "bn.beta_i");
                Ok((
                    tape.value(loss).item()?,
                    vec![
                        grad_or_zeros(&grads, h.re, &ins[0]),
                        grad_or_zeros(&grads, h.im, &ins[1]),
                        ggr,
                        ggi,
                        gbr,
                        gbi,
                    ],
                ))
            },
            &[xr, xi, gr, gi, befr, befi],
            FD_EPS,
        )
        .unwrap();
        merged.merge(r);
    }
    merged
}

fn residual_fd(rng: &mut ChaCha12Rng) -> FdReport {
    let mut merged = FdReport::default();
    for case in 0..SHAPES_PER_OP {
        // Alternate identity-skip and projection-skip blocks.
        let (cin, cout) = if case % 2 == 0 { (2, 2) } else { (1, 2) };
        let block = ComplexResidualBlock::new("blk", cin, cout, BnMode::PerComponent).unwrap();
        let xr = rand_t(rng, vec![2, cin, 4, 4], -1.0, 1.0);
        let xi = rand_t(rng, vec![2, cin, 4, 4], -1.0, 1.0);
        let a1 = rand_t(rng, vec![cout, cin, 3, 3], -0.6, 0.6);
        let g1 = rand_t(rng, vec![cin], 0.5, 1.5);
        let seed = rng.gen::<u64>();
        let r = check_gradient(
            |ins| {
                let mut store = ParamStore::new();
                let mut seed_rng = ChaCha12Rng::seed_from_u64(seed);
                block.register(&mut store, InitScheme::GlorotUniform, &mut seed_rng)?;
                store.get_mut("blk.conv1.A")?.value = Value::Real(ins[2].clone());
                store.get_mut("blk.bn1.gamma_r")?.value = Value::Real(ins[3].clone());
                let mut tape = Tape::new();
                let h = CVar { re: tape.leaf_grad(ins[0].clone()), im: tape.leaf_grad(ins[1].clone()) };
                let y = block.forward(&mut tape, &mut store, h, true)?;
                let loss = project_loss_pair(&mut tape, y)?;
                let grads = tape.backward(loss)?;
                store.accumulate_grads(&tape, &grads)?;
                let (ga1, _) = param_grad(&store, "blk.conv1.A");
                let (gg1, _) = param_grad(&store, "blk.bn1.gamma_r");
                Ok((
                    tape.value(loss).item()?,
                    vec![
                        grad_or_zeros(&grads, h.re, &ins[0]),
                        grad_or_zeros(&grads, h.im, &ins[1]),
                        ga1,
                        gg1,
                    ],
                ))
            },
            &[xr, xi, a1, g1],
            FD_EPS,
        )
        .unwrap();
        merged.merge(r);
    }
    merged
}

fn softpn_fd(rng: &mut ChaCha12Rng) -> FdReport {
    let mut merged = FdReport::default();
    for case in 0..SHAPES_PER_OP {
        let d = rng.gen_range(2..5);
        let dist = if case % 2 == 0 { DistanceMode::ModulusSum } else { DistanceMode::LiteralClamped };
        let form = if case % 3 == 0 { LossForm::Literal } else { LossForm::Corrected };
        // Keep every coordinate away from the sqrt/clamp kinks and the
        // min_elem tie: resample until the margins hold.
        let (f1r, f1i, f2r, f2i, fnr, fni) = loop {
            let mk = |rng: &mut ChaCha12Rng| rand_t(rng, vec![2, d], -1.0, 1.0);
            let (f1r, f1i, f2r, f2i, fnr, fni) = (mk(rng), mk(rng), mk(rng), mk(rng), mk(rng), mk(rng));
            let ok_pair = |ar: &Tensor, ai: &Tensor, br: &Tensor, bi: &Tensor| {
                ar.data().iter().zip(ai.data()).zip(br.data().iter().zip(bi.data())).all(
                    |((xr, xi), (yr, yi))| {
                        let dr = (xr - yr).abs();
                        let di = (xi - yi).abs();
                        dr * dr + di * di > 1e-2 && (dr * dr - di * di).abs() > 1e-2
                    },
                )
            };
            if !(ok_pair(&f1r, &f1i, &f2r, &f2i) && ok_pair(&f1r, &f1i, &fnr, &fni) && ok_pair(&f2r, &f2i, &fnr, &fni)) {
                continue;
            }
            // min_elem tie margin between the two negative distances.
            let c = |re: &Tensor, im: &Tensor| ComplexTensor::new(re.clone(), im.clone()).unwrap();
            let mut tied = false;
            for row in 0..2 {
                let take = |t: &Tensor| t.slice(0, row, row + 1).unwrap().reshape(vec![d]).unwrap();
                let d1 = complex_distance(&c(&take(&f1r), &take(&f1i)), &c(&take(&fnr), &take(&fni)), dist).unwrap();
                let d2 = complex_distance(&c(&take(&f2r), &take(&f2i)), &c(&take(&fnr), &take(&fni)), dist).unwrap();
                if (d1 - d2).abs() < 1e-2 {
                    tied = true;
                }
            }
            if !tied {
                break (f1r, f1i, f2r, f2i, fnr, fni);
            }
        };
        let r = check_gradient(
            |ins| {
                let mut tape = Tape::new();
                let f1 = CVar { re: tape.leaf_grad(ins[0].clone()), im: tape.leaf_grad(ins[1].clone()) };
                let f2 = CVar { re: tape.leaf_grad(ins[2].clone()), im: tape.leaf_grad(ins[3].clone()) };
                let f3 = CVar { re: tape.leaf_grad(ins[4].clone()), im: tape.leaf_grad(ins[5].clone()) };
                let loss = softpn_loss_graph(&mut tape, f1, f2, f3, dist, form)?;
                let grads = tape.backward(loss)?;
                Ok((
                    tape.value(loss).item()?,
                    vec![
                        grad_or_zeros(&grads, f1.re, &ins[0]),
                        grad_or_zeros(&grads, f1.im, &ins[1]),
                        grad_or_zeros(&grads, f2.re, &ins[2]),
                        grad_or_zeros(&grads, f2.im, &ins[3]),
                        grad_or_zeros(&grads, f3.re, &ins[4]),
                        grad_or_zeros(&grads, f3.im, &ins[5]),
                    ],
                ))
            },
            &[f1r, f1i, f2r, f2i, fnr, fni],
            FD_EPS,
        )
        .unwrap();
        merged.merge(r);
    }
    merged
}

fn mse_fd(rng: &mut ChaCha12Rng) -> FdReport {
    let mut merged = FdReport::default();
    for _ in 0..SHAPES_PER_OP {
        let n = rng.gen_range(2..8);
        let scores = rand_t(rng, vec![n], 0.05, 0.95);
        let labels = Tensor::from_fn(vec![n], |i| (i % 2) as f64);
        let r = check_gradient(
            |ins| {
                let mut tape = Tape::new();
                let s = tape.leaf_grad(ins[0].clone());
                let loss = mse_loss_graph(&mut tape, s, &labels)?;
                let grads = tape.backward(loss)?;
                Ok((tape.value(loss).item()?, vec![grad_or_zeros(&grads, s, &ins[0])]))
            },
            &[scores],
            FD_EPS,
        )
        .unwrap();
        merged.merge(r);
    }
    merged
}

// ---- structural / statistical suites ----

pub fn run_conv_structural_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let cases = 100;
    for _ in 0..cases {
        let k = if rng.gen::<bool>() { 3 } else { 1 };
        let pad = if k == 3 { 1 } else { 0 };
        let (n, cin, cout) = (rng.gen_range(1..3), rng.gen_range(1..5), rng.gen_range(1..5));
        let (h, w) = (rng.gen_range(3..8), rng.gen_range(3..8));
        let layer = ComplexConv2d::new("l", cin, cout, k, pad).unwrap();
        let mut store = ParamStore::new();
        let mut init_rng = ChaCha12Rng::seed_from_u64(rng.gen());
        layer.register(&mut store, InitScheme::GlorotUniform, &mut init_rng).unwrap();
        let a = store.get("l.A").unwrap().value.as_real().unwrap().clone();
        let b = store.get("l.B").unwrap().value.as_real().unwrap().clone();
        let xr = rand_t(&mut rng, vec![n, cin, h, w], -1.0, 1.0);
        let xi = rand_t(&mut rng, vec![n, cin, h, w], -1.0, 1.0);

        // Production path (bias is zero-initialized).
        let mut tape = Tape::new();
        let hvar = CVar { re: tape.leaf(xr.clone()), im: tape.leaf(xi.clone()) };
        let y = layer.forward(&mut tape, &store, hvar).unwrap();
        let (yr, yi) = (tape.value(y.re), tape.value(y.im));

        // Block-matrix form: stack [x; y] channels and convolve with
        // [[A, -B], [B, A]] as one real convolution.
        let stacked = Tensor::concat(&[&xr, &xi], 1).unwrap();
        let kk = k * k;
        let mut wblk = vec![0.0; 2 * cout * 2 * cin * kk];
        for co in 0..cout {
            for ci in 0..cin {
                for t in 0..kk {
                    let av = a.data()[(co * cin + ci) * kk + t];
                    let bv = b.data()[(co * cin + ci) * kk + t];
                    // top rows: [A, -B]; bottom rows: [B, A]
                    wblk[((co * 2 * cin) + ci) * kk + t] = av;
                    wblk[((co * 2 * cin) + cin + ci) * kk + t] = -bv;
                    wblk[(((cout + co) * 2 * cin) + ci) * kk + t] = bv;
                    wblk[(((cout + co) * 2 * cin) + cin + ci) * kk + t] = av;
                }
            }
        }
        let wblk = Tensor::from_vec(vec![2 * cout, 2 * cin, k, k], wblk).unwrap();
        let mut tape2 = Tape::new();
        let sx = tape2.leaf(stacked);
        let sw = tape2.leaf(wblk);
        let yb = tape2.conv2d(sx, sw, pad, 1).unwrap();
        let full = tape2.value(yb);
        let (ho, wo) = (yr.dims()[2], yr.dims()[3]);
        for ni in 0..n {
            for co in 0..cout {
                for p in 0..ho * wo {
                    let re_block = full.data()[((ni * 2 * cout + co) * ho * wo) + p];
                    let im_block = full.data()[((ni * 2 * cout + cout + co) * ho * wo) + p];
                    let er = (yr.data()[((ni * cout + co) * ho * wo) + p] - re_block).abs();
                    let ei = (yi.data()[((ni * cout + co) * ho * wo) + p] - im_block).abs();
                    max_err = max_err.max(er).max(ei);
                }
            }
        }
    }
    SuiteReport {
        name: "conv-structural",
        cases,
        max_err,
        passed: max_err <= 1e-12,
        note: "complex conv vs block-matrix real conv".into(),
    }
}

pub fn run_bn_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let mut cases = 0;

    // Per-component mode on per-channel standardized batches.
    for _ in 0..10 {
        let c = rng.gen_range(1..4);
        let (n, h, w) = (4, 4, 4);
        let standardize = |t: Tensor| -> Tensor {
            let plane = h * w;
            let mut data = t.data().to_vec();
            for ci in 0..c {
                let mut vals = Vec::new();
                for ni in 0..n {
                    let base = (ni * c + ci) * plane;
                    vals.extend_from_slice(&data[base..base + plane]);
                }
                let m = vals.iter().sum::<f64>() / vals.len() as f64;
                let var = vals.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / vals.len() as f64;
                let s = var.sqrt();
                for ni in 0..n {
                    let base = (ni * c + ci) * plane;
                    for v in &mut data[base..base + plane] {
                        *v = (*v - m) / s;
                    }
                }
            }
            Tensor::from_vec(t.dims().to_vec(), data).unwrap()
        };
        let xr = standardize(rand_t(&mut rng, vec![n, c, h, w], -2.0, 2.0));
        let xi = standardize(rand_t(&mut rng, vec![n, c, h, w], -2.0, 2.0));
        let bn = ComplexBatchNorm::new("bn", c, BnMode::PerComponent);
        let mut store = ParamStore::new();
        bn.register(&mut store).unwrap();
        let mut tape = Tape::new();
        let hvar = CVar { re: tape.leaf(xr), im: tape.leaf(xi) };
        let y = bn.forward(&mut tape, &mut store, hvar, true).unwrap();
        for part in [tape.value(y.re), tape.value(y.im)] {
            let cov = oracles::channel_covariance(part, part);
            let plane = h * w;
            for ci in 0..c {
                let mut mean = 0.0;
                for ni in 0..n {
                    let base = (ni * c + ci) * plane;
                    mean += part.data()[base..base + plane].iter().sum::<f64>();
                }
                mean /= (n * plane) as f64;
                let target_var = 1.0 / (1.0 + bn.eps);
                // Track both criteria scaled to their own tolerances.
                max_err = max_err.max(mean.abs() / 1e-7);
                max_err = max_err.max((cov[ci].0 - target_var).abs() / 1e-6);
                cases += 1;
            }
        }
    }

    // Covariance mode: whitened batch covariance must be the identity.
    for _ in 0..10 {
        let c = rng.gen_range(1..4);
        let (n, h, w) = (6, 4, 4);
        let base_r = rand_t(&mut rng, vec![n, c, h, w], -1.0, 1.0);
        let base_i = rand_t(&mut rng, vec![n, c, h, w], -1.0, 1.0);
        // Correlated, high-variance parts so eps*I is negligible.
        let re = base_r.scale(25.0);
        let im = base_r.zip_map(&base_i, |r, i| 10.0 * r + 15.0 * i).unwrap();
        let bn = ComplexBatchNorm::new("bn", c, BnMode::Covariance);
        let mut store = ParamStore::new();
        bn.register(&mut store).unwrap();
        let mut tape = Tape::new();
        let hvar = CVar { re: tape.leaf(re), im: tape.leaf(im) };
        let y = bn.forward(&mut tape, &mut store, hvar, true).unwrap();
        let cov = oracles::channel_covariance(tape.value(y.re), tape.value(y.im));
        for (vrr, vri, vii) in cov {
            max_err = max_err.max((vrr - 1.0).abs() / 1e-6);
            max_err = max_err.max((vii - 1.0).abs() / 1e-6);
            max_err = max_err.max(vri.abs() / 1e-6);
            cases += 1;
        }
    }

    SuiteReport {
        name: "bn",
        cases,
        max_err,
        passed: max_err <= 1.0,
        note: "errors scaled to per-criterion tolerances".into(),
    }
}

pub fn run_loss_distance_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_err = 0.0f64;
    let mut cases = 0;
    for _ in 0..10_000 {
        let d = rng.gen_range(2..16);
        let mk = |rng: &mut ChaCha12Rng| {
            ComplexTensor::new(rand_t(rng, vec![d], -1.0, 1.0), rand_t(rng, vec![d], -1.0, 1.0)).unwrap()
        };
        let (f1, f2, f3) = (mk(&mut rng), mk(&mut rng), mk(&mut rng));
        for mode in [DistanceMode::ModulusSum, DistanceMode::LiteralClamped] {
            let d12 = complex_distance(&f1, &f2, mode).unwrap();
            let d21 = complex_distance(&f2, &f1, mode).unwrap();
            let self_d = complex_distance(&f1, &f1, mode).unwrap();
            assert!(d12 >= 0.0);
            max_err = max_err.max(self_d.abs()).max((d12 - d21).abs());
        }
        // Triangle inequality for the modulus reading.
        let d12 = complex_distance(&f1, &f2, DistanceMode::ModulusSum).unwrap();
        let d13 = complex_distance(&f1, &f3, DistanceMode::ModulusSum).unwrap();
        let d23 = complex_distance(&f2, &f3, DistanceMode::ModulusSum).unwrap();
        max_err = max_err.max((d13 - d12 - d23).max(0.0));
        cases += 1;
    }
    // Value 0.5 at Dpos = D* in both forms.
    for _ in 0..100 {
        let dp = rng.gen_range(0.0..5.0);
        for form in [LossForm::Literal, LossForm::Corrected] {
            max_err = max_err.max((softpn_from_distances(dp, dp, form) - 0.5).abs());
        }
        cases += 1;
    }
    // Corrected form monotonicity by finite differences.
    let h = 1e-4;
    let mut monotone = true;
    for _ in 0..200 {
        let dp = rng.gen_range(0.1..4.0);
        let ds = rng.gen_range(0.1..4.0);
        let dn = softpn_from_distances(dp, ds + h, LossForm::Corrected)
            - softpn_from_distances(dp, ds - h, LossForm::Corrected);
        let dd = softpn_from_distances(dp + h, ds, LossForm::Corrected)
            - softpn_from_distances(dp - h, ds, LossForm::Corrected);
        if dn >= 0.0 || dd <= 0.0 {
            monotone = false;
        }
        cases += 1;
    }
    SuiteReport {
        name: "loss-distance",
        cases,
        max_err,
        passed: max_err <= 1e-9 && monotone,
        note: format!("corrected form monotone: {monotone}"),
    }
}

pub fn run_fpr95_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let cases = 1000;
    let mut mismatches = 0;
    for case in 0..cases {
        let n = rng.gen_range(2..=200);
        let quantize = case % 5 == 0; // exercise tie handling too
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                let s = rng.gen::<f64>();
                if quantize {
                    (s * 10.0).round() / 10.0
                } else {
                    s
                }
            })
            .collect();
        let labels: Vec<bool> = loop {
            let l: Vec<bool> = (0..n).map(|_| rng.gen()).collect();
            if l.iter().any(|&x| x) && l.iter().any(|&x| !x) {
                break l;
            }
        };
        let polarity = if case % 2 == 0 { Polarity::HigherIsMatch } else { Polarity::LowerIsMatch };
        let fast = fpr95(&scores, &labels, polarity).unwrap();
        let brute = oracles::brute_fpr95(&scores, &labels, polarity);
        if fast != brute {
            mismatches += 1;
        }
    }
    SuiteReport {
        name: "fpr95-brute",
        cases,
        max_err: mismatches as f64,
        passed: mismatches == 0,
        note: "exact equality against per-threshold recount".into(),
    }
}

pub fn run_dft_suite(seed: u64) -> SuiteReport {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut max_abs = 0.0f64;
    let mut max_parseval = 0.0f64;
    let mut cases = 0;
    for h in 1..=8usize {
        for w in 1..=8usize {
            let (n, c) = (rng.gen_range(1..3), rng.gen_range(1..3));
            let x = rand_t(&mut rng, vec![n, c, h, w], -1.0, 1.0);
            let fast = dft2d(&x).unwrap();
            let slow = oracles::naive_dft2d(&x).unwrap();
            for (a, b) in fast.re().data().iter().zip(slow.re().data()) {
                max_abs = max_abs.max((a - b).abs());
            }
            for (a, b) in fast.im().data().iter().zip(slow.im().data()) {
                max_abs = max_abs.max((a - b).abs());
            }
            // Parseval per plane: sum |F|^2 == H*W * sum x^2.
            let hw = (h * w) as f64;
            let planes = n * c;
            for p in 0..planes {
                let lo = p * h * w;
                let hi = lo + h * w;
                let spec: f64 = fast.re().data()[lo..hi]
                    .iter()
                    .zip(&fast.im().data()[lo..hi])
                    .map(|(r, i)| r * r + i * i)
                    .sum();
                let sig: f64 = x.data()[lo..hi].iter().map(|v| v * v).sum();
                if sig > 0.0 {
                    max_parseval = max_parseval.max((spec - hw * sig).abs() / (hw * sig));
                }
            }
            cases += 1;
        }
    }
    SuiteReport {
        name: "dft",
        cases,
        max_err: max_abs.max(max_parseval),
        passed: max_abs <= 1e-10 && max_parseval <= 1e-8,
        note: format!("naive diff {max_abs:.3e}, parseval rel {max_parseval:.3e}"),
    }
}
