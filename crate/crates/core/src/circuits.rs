//! Benchmark circuit generators.
//!
//! * [`build_f21_lookup`]: `X^A mod N` by direct table lookup, one
//!   multi-controlled flip per input value.
//! * [`build_modexp`]: repeated squaring, a chain of controlled modular
//!   multiplications built from ripple-carry adders.
//! * [`build_grover`]: Grover search over a register `l` with phase ancilla
//!   `r` and reflection ancilla `s`.
//!
//! Programs are plain gate lists plus register metadata; the first
//! `prep_len` gates prepare the input superposition and are skipped by
//! [`evaluate_classical`].

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt::Write as _;

use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::gates::{clear_and_renormalize, Gate, Support};
use crate::pulse::{apply_pulse, PulseKind, PulseSpec};
use crate::statespace::{ModelKind, QuantumState, Register};
use crate::{Error, Result, Scalar};

/// Register value whose probability is the program's success metric.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Target {
    pub register: String,
    pub value: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircuitProgram {
    pub name: String,
    pub num_qubits: usize,
    pub registers: Vec<Register>,
    pub initial_bits: u64,
    /// Leading gates that prepare the input superposition.
    pub prep_len: usize,
    pub gates: Vec<Gate>,
    pub target: Option<Target>,
}

impl CircuitProgram {
    pub fn new(name: impl Into<String>, num_qubits: usize, registers: Vec<Register>) -> Self {
        Self {
            name: name.into(),
            num_qubits,
            registers,
            initial_bits: 0,
            prep_len: 0,
            gates: Vec::new(),
            target: None,
        }
    }

    pub fn register(&self, name: &str) -> Result<&Register> {
        self.registers
            .iter()
            .find(|r| r.name == name)
            .ok_or_else(|| {
                Error::InvalidArgument(format!("program `{}` has no register `{name}`", self.name))
            })
    }

    /// Pulses in the lowering, with conditional flips counted once.
    pub fn pulse_count(&self) -> usize {
        self.gates.iter().map(Gate::pulse_count).sum()
    }

    pub fn validate(&self) -> Result<()> {
        let mut used = vec![false; self.num_qubits];
        for r in &self.registers {
            if r.start + r.len > self.num_qubits {
                return Err(Error::InvalidArgument(format!(
                    "register `{}` exceeds {} qubits",
                    r.name, self.num_qubits
                )));
            }
            for q in r.range() {
                if std::mem::replace(&mut used[q], true) {
                    return Err(Error::InvalidArgument(format!(
                        "register `{}` overlaps another",
                        r.name
                    )));
                }
            }
        }
        if self.prep_len > self.gates.len() {
            return Err(Error::InvalidArgument(
                "prep length exceeds gate count".into(),
            ));
        }
        if self.num_qubits < 64 && self.initial_bits >> self.num_qubits != 0 {
            return Err(Error::InvalidArgument(
                "initial bits exceed the qubit count".into(),
            ));
        }
        if let Some(t) = &self.target {
            let r = self.register(&t.register)?;
            if r.len < 64 && t.value >> r.len != 0 {
                return Err(Error::InvalidArgument(format!(
                    "target value {} exceeds register `{}`",
                    t.value, r.name
                )));
            }
        }
        self.gates
            .iter()
            .try_for_each(|g| g.validate(self.num_qubits))
    }

    pub fn initial_state<T: Scalar>(&self, model: ModelKind) -> Result<QuantumState<T>> {
        let mut s = QuantumState::new(model, self.num_qubits, self.initial_bits)?;
        s.set_registers(self.registers.clone());
        Ok(s)
    }

    /// Line-oriented text form; see [`CircuitProgram::parse`].
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "NAME {}", self.name);
        let _ = writeln!(out, "QUBITS {}", self.num_qubits);
        for r in &self.registers {
            let _ = writeln!(out, "REGISTER {} {} {}", r.name, r.start, r.len);
        }
        let _ = writeln!(out, "INIT {}", self.initial_bits);
        let _ = writeln!(out, "PREP {}", self.prep_len);
        if let Some(t) = &self.target {
            let _ = writeln!(out, "TARGET {} {}", t.register, t.value);
        }
        for g in &self.gates {
            let _ = writeln!(out, "GATE {g}");
        }
        out
    }

    /// Parses the [`dump`](CircuitProgram::dump) format. Blank lines and `#`
    /// comments are ignored; a missing `QUBITS` line is inferred from the gates.
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = CircuitProgram::new("custom", 0, Vec::new());
        let mut declared = None;
        for (i, raw) in text.lines().enumerate() {
            let line_no = i + 1;
            let bad = |message: String| Error::Parse {
                line: line_no,
                message,
            };
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let mut words = line.split_whitespace();
            let keyword = words.next().unwrap_or_default();
            let rest: Vec<&str> = words.collect();
            let num = |s: &str| s.parse::<u64>().map_err(|e| bad(format!("`{s}`: {e}")));
            match (keyword, rest.as_slice()) {
                ("NAME", [name]) => p.name = name.to_string(),
                ("QUBITS", [n]) => declared = Some(num(n)? as usize),
                ("REGISTER", [name, start, len]) => p.registers.push(Register::new(
                    *name,
                    num(start)? as usize,
                    num(len)? as usize,
                )),
                ("INIT", [bits]) => p.initial_bits = num(bits)?,
                ("PREP", [n]) => p.prep_len = num(n)? as usize,
                ("TARGET", [reg, value]) => {
                    p.target = Some(Target {
                        register: reg.to_string(),
                        value: num(value)?,
                    })
                }
                ("GATE", [name, args @ ..]) => p.gates.push(parse_gate(name, args).map_err(bad)?),
                _ => return Err(bad(format!("unrecognized line `{line}`"))),
            }
        }
        let needed = p
            .gates
            .iter()
            .flat_map(Gate::qubits)
            .chain(
                p.registers
                    .iter()
                    .map(|r| r.start + r.len)
                    .filter(|&e| e > 0)
                    .map(|e| e - 1),
            )
            .max()
            .map_or(0, |q| q + 1);
        p.num_qubits = declared.unwrap_or(needed);
        p.validate()?;
        Ok(p)
    }
}

fn parse_gate(name: &str, args: &[&str]) -> std::result::Result<Gate, String> {
    let q = |s: &str| s.parse::<usize>().map_err(|e| format!("qubit `{s}`: {e}"));
    let f = |s: &str| s.parse::<f64>().map_err(|e| format!("angle `{s}`: {e}"));
    Ok(match (name, args) {
        ("rot", [a, t, ph]) => Gate::Rotation {
            qubit: q(a)?,
            theta: f(t)?,
            phi: f(ph)?,
        },
        ("not", [a]) => Gate::not(q(a)?),
        ("cnot", [c, t]) => Gate::CNot {
            control: q(c)?,
            target: q(t)?,
        },
        ("cphase", [c, t]) => Gate::CPhase {
            control: q(c)?,
            target: q(t)?,
        },
        ("ccnot", [a, b, t]) => Gate::CCNot {
            controls: [q(a)?, q(b)?],
            target: q(t)?,
        },
        ("set", [a]) => Gate::SetBit(q(a)?),
        ("clear", [a]) => Gate::ClearBit(q(a)?),
        ("reuse", [a]) => Gate::ReuseRenorm(q(a)?),
        ("fourier", [a]) => Gate::Fourier(q(a)?),
        ("reflect", [qs @ .., anc]) if !qs.is_empty() => Gate::ReflectZero {
            qubits: qs
                .iter()
                .map(|s| q(s))
                .collect::<std::result::Result<_, _>>()?,
            ancilla: q(anc)?,
        },
        _ => return Err(format!("bad gate `{name}` with {} arguments", args.len())),
    })
}

/// Runs the non-prep gates on a classical bit pattern. Rotations must be
/// bit flips (`θ = π`); measurements collapse trivially.
pub fn evaluate_classical(program: &CircuitProgram, bits: u64) -> Result<u64> {
    if program.num_qubits > 64 {
        return Err(Error::InvalidArgument(
            "classical evaluation is limited to 64 qubits".into(),
        ));
    }
    let mut x = bits;
    let bit = |x: u64, q: usize| x >> q & 1 == 1;
    for g in &program.gates[program.prep_len..] {
        match *g {
            Gate::Rotation { qubit, theta, .. } if (theta.abs() - PI).abs() < 1e-12 => {
                x ^= 1 << qubit
            }
            Gate::CNot { control, target } => {
                if bit(x, control) {
                    x ^= 1 << target
                }
            }
            Gate::CPhase { .. } => {}
            Gate::CCNot {
                controls: [a, b],
                target,
            } => {
                if bit(x, a) && bit(x, b) {
                    x ^= 1 << target
                }
            }
            Gate::SetBit(q) => x |= 1 << q,
            Gate::ClearBit(q) => x &= !(1 << q),
            ref other => {
                return Err(Error::InvalidArgument(format!(
                    "`{other}` has no classical action"
                )));
            }
        }
    }
    Ok(x)
}

pub fn register_value(bits: u64, register: &Register) -> u64 {
    (bits >> register.start) & ((1u64 << register.len) - 1)
}

/// NOT on `targets` controlled by all of `controls`, using `dirty` qubits as
/// borrowed ancillas (their values are arbitrary and restored).
pub fn mcx(controls: &[usize], target: usize, dirty: &[usize]) -> Result<Vec<Gate>> {
    let n = controls.len();
    match n {
        0 => return Ok(vec![Gate::not(target)]),
        1 => {
            return Ok(vec![Gate::CNot {
                control: controls[0],
                target,
            }])
        }
        2 => {
            return Ok(vec![Gate::CCNot {
                controls: [controls[0], controls[1]],
                target,
            }])
        }
        _ => {}
    }
    if dirty.len() >= n - 2 {
        let a = &dirty[..n - 2];
        let x = controls;
        let mut half = Vec::with_capacity(2 * n - 4);
        // Down the ladder from the target, the middle Toffoli, back up.
        half.push(Gate::CCNot {
            controls: [x[n - 1], a[n - 3]],
            target,
        });
        for i in (1..n - 2).rev() {
            half.push(Gate::CCNot {
                controls: [x[i + 1], a[i - 1]],
                target: a[i],
            });
        }
        half.push(Gate::CCNot {
            controls: [x[0], x[1]],
            target: a[0],
        });
        for i in 1..n - 2 {
            half.push(Gate::CCNot {
                controls: [x[i + 1], a[i - 1]],
                target: a[i],
            });
        }
        let mut out = half.clone();
        out.extend(half);
        return Ok(out);
    }
    let Some((&anc, _)) = dirty.split_first() else {
        return Err(Error::InvalidArgument(format!(
            "{n}-controlled NOT needs at least one borrowed qubit"
        )));
    };
    let k = n.div_ceil(2);
    let (first, second) = controls.split_at(k);
    let spare1: Vec<usize> = second.iter().copied().chain([target]).collect();
    let m1 = mcx(first, anc, &spare1)?;
    let c2: Vec<usize> = second.iter().copied().chain([anc]).collect();
    let m2 = mcx(&c2, target, first)?;
    let mut out = Vec::with_capacity(2 * (m1.len() + m2.len()));
    for _ in 0..2 {
        out.extend_from_slice(&m2);
        out.extend_from_slice(&m1);
    }
    Ok(out)
}

/// Parameters for the table-lookup circuit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LookupSpec {
    pub input_bits: usize,
    pub x: u64,
    pub n: u64,
}

impl Default for LookupSpec {
    fn default() -> Self {
        Self {
            input_bits: 6,
            x: 2,
            n: 21,
        }
    }
}

fn pow_mod(x: u64, mut e: u64, n: u64) -> u64 {
    let (mut acc, mut base) = (1 % n, x % n);
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % n;
        }
        base = base * base % n;
        e >>= 1;
    }
    acc
}

fn bit_width(n: u64) -> usize {
    (u64::BITS - n.leading_zeros()) as usize
}

/// `F = X^A mod N` by direct lookup. Registers `A` then `F`.
pub fn build_f21_lookup(spec: LookupSpec) -> Result<CircuitProgram> {
    let LookupSpec {
        input_bits: la,
        x,
        n,
    } = spec;
    if n < 2 || x == 0 || x >= n || x.gcd(&n) != 1 {
        return Err(Error::InvalidArgument(format!(
            "invalid lookup base {x} modulo {n}"
        )));
    }
    if !(1..=16).contains(&la) {
        return Err(Error::InvalidArgument(
            "lookup input register must have 1..=16 qubits".into(),
        ));
    }
    let lf = bit_width(n - 1);
    let a_reg = Register::new("A", 0, la);
    let f_reg = Register::new("F", la, lf);
    let mut p = CircuitProgram::new(format!("f{n}"), la + lf, vec![a_reg.clone(), f_reg.clone()]);
    p.gates
        .extend(a_reg.qubits().into_iter().map(Gate::superpose));
    p.prep_len = p.gates.len();

    let a_qubits = a_reg.qubits();
    let mut dressed = 0u64; // A qubits currently carrying a NOT
    for k in 0..1u64 << la {
        let a = k ^ (k >> 1);
        let want = !a & ((1 << la) - 1);
        for (i, &q) in a_qubits.iter().enumerate() {
            if (dressed ^ want) >> i & 1 == 1 {
                p.gates.push(Gate::not(q));
            }
        }
        dressed = want;
        let v = pow_mod(x, a, n);
        let set: Vec<usize> = (0..lf)
            .filter(|b| v >> b & 1 == 1)
            .map(|b| f_reg.qubit(b))
            .collect();
        let Some((&first, others)) = set.split_first() else {
            continue;
        };
        let dirty: Vec<usize> = f_reg.qubits().into_iter().filter(|&q| q != first).collect();
        let spread: Vec<Gate> = others
            .iter()
            .map(|&t| Gate::CNot {
                control: first,
                target: t,
            })
            .collect();
        p.gates.extend(spread.iter().cloned());
        p.gates.extend(mcx(&a_qubits, first, &dirty)?);
        p.gates.extend(spread);
    }
    for (i, &q) in a_qubits.iter().enumerate() {
        if dressed >> i & 1 == 1 {
            p.gates.push(Gate::not(q));
        }
    }
    p.validate()?;
    Ok(p)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModexpVariant {
    /// `2L + 1` input qubits, one multiplication per input bit.
    Full,
    /// One input qubit and one controlled multiplication.
    SingleMult,
    /// Three input qubits; the third is reset and reused for the last `2L - 2` multiplications.
    A3Bit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModexpSpec {
    pub l: usize,
    pub x: u64,
    pub n: u64,
    pub variant: ModexpVariant,
}

impl ModexpSpec {
    pub fn f15(variant: ModexpVariant) -> Self {
        Self {
            l: 4,
            x: 7,
            n: 15,
            variant,
        }
    }

    pub fn input_bits(&self) -> usize {
        match self.variant {
            ModexpVariant::Full => 2 * self.l + 1,
            ModexpVariant::SingleMult => 1,
            ModexpVariant::A3Bit => 3,
        }
    }

    /// Input register plus product, adder scratch and multiplier scratch.
    pub fn num_qubits(&self) -> usize {
        self.input_bits() + 3 * self.l + 3
    }

    pub fn validate(&self) -> Result<()> {
        let ModexpSpec { l, x, n, variant } = *self;
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if !(2..=16).contains(&l) {
            return bad(format!("modulus width {l} outside 2..=16"));
        }
        if n < 1 << (l - 1) || n >= 1 << l {
            return bad(format!("modulus {n} is not {l} bits wide"));
        }
        if x == 0 || x >= n || x.gcd(&n) != 1 {
            return bad(format!("base {x} must be a unit below {n}"));
        }
        if variant == ModexpVariant::A3Bit && pow_mod(x, 4, n) != 1 {
            return bad(format!(
                "reusing the third input qubit needs {x}^4 = 1 mod {n}"
            ));
        }
        Ok(())
    }
}

fn mod_inverse(c: u64, n: u64) -> u64 {
    let e = (c as i64).extended_gcd(&(n as i64));
    e.x.rem_euclid(n as i64) as u64
}

#[derive(Clone, Copy, Debug)]
enum Bit {
    Zero,
    One,
    Qubit(usize),
}

struct Arith {
    n: u64,
    product: Vec<usize>,
    /// Ripple carries, then the comparison flag.
    carries: Vec<usize>,
    flag: usize,
    /// `L + 1` accumulator bits, then the combined-control bit.
    acc: Vec<usize>,
    combo: usize,
}

impl Arith {
    fn addend(&self, k: u64, on: Bit) -> Vec<Bit> {
        (0..self.product.len())
            .map(|i| if k >> i & 1 == 1 { on } else { Bit::Zero })
            .collect()
    }

    fn ccx(out: &mut Vec<Gate>, a: Bit, b: usize, t: usize) {
        match a {
            Bit::Zero => {}
            Bit::One => out.push(Gate::CNot {
                control: b,
                target: t,
            }),
            Bit::Qubit(x) => out.push(Gate::CCNot {
                controls: [x, b],
                target: t,
            }),
        }
    }

    fn cx(out: &mut Vec<Gate>, a: Bit, t: usize) {
        match a {
            Bit::Zero => {}
            Bit::One => out.push(Gate::not(t)),
            Bit::Qubit(x) => out.push(Gate::CNot {
                control: x,
                target: t,
            }),
        }
    }

    /// Ripple-carry `acc += addend`, the top accumulator bit taking the overflow.
    fn add(&self, addend: &[Bit]) -> Vec<Gate> {
        let l = addend.len();
        let (c, b) = (&self.carries, &self.acc);
        let mut out = Vec::new();
        for i in 0..l {
            let d = if i + 1 < l { c[i + 1] } else { b[l] };
            Self::ccx(&mut out, addend[i], b[i], d);
            Self::cx(&mut out, addend[i], b[i]);
            out.push(Gate::CCNot {
                controls: [c[i], b[i]],
                target: d,
            });
        }
        out.push(Gate::CNot {
            control: c[l - 1],
            target: b[l - 1],
        });
        for i in (0..l - 1).rev() {
            out.push(Gate::CCNot {
                controls: [c[i], b[i]],
                target: c[i + 1],
            });
            Self::cx(&mut out, addend[i], b[i]);
            Self::ccx(&mut out, addend[i], b[i], c[i + 1]);
            Self::cx(&mut out, addend[i], b[i]);
            out.push(Gate::CNot {
                control: c[i],
                target: b[i],
            });
        }
        out
    }

    fn sub(&self, addend: &[Bit]) -> Vec<Gate> {
        let mut g = self.add(addend);
        g.reverse();
        g
    }

    /// `acc = (acc + k·combo) mod N` for `acc < N`.
    fn mod_add(&self, k: u64) -> Vec<Gate> {
        let top = self.acc[self.product.len()];
        let k_bits = self.addend(k, Bit::Qubit(self.combo));
        let mut out = self.add(&k_bits);
        out.extend(self.sub(&self.addend(self.n, Bit::One)));
        out.push(Gate::CNot {
            control: top,
            target: self.flag,
        });
        out.extend(self.add(&self.addend(self.n, Bit::Qubit(self.flag))));
        out.extend(self.sub(&k_bits));
        out.push(Gate::not(top));
        out.push(Gate::CNot {
            control: top,
            target: self.flag,
        });
        out.push(Gate::not(top));
        out.extend(self.add(&k_bits));
        out
    }

    /// Accumulate `Σ_i [ctrl ∧ P_i]·k_i·2^i mod N`.
    fn mul_accumulate(&self, ctrl: usize, c: u64) -> Vec<Gate> {
        let mut out = Vec::new();
        let mut k = c % self.n;
        for &p in &self.product {
            let mark = Gate::CCNot {
                controls: [ctrl, p],
                target: self.combo,
            };
            out.push(mark.clone());
            out.extend(self.mod_add(k));
            out.push(mark);
            k = 2 * k % self.n;
        }
        out
    }

    /// `P ← c·P mod N` when `ctrl` is set.
    fn controlled_multiply(&self, ctrl: usize, c: u64) -> Vec<Gate> {
        let mut out = self.mul_accumulate(ctrl, c);
        for (&p, &a) in self.product.iter().zip(&self.acc) {
            out.push(Gate::CNot {
                control: a,
                target: p,
            });
            out.push(Gate::CCNot {
                controls: [ctrl, p],
                target: a,
            });
            out.push(Gate::CNot {
                control: a,
                target: p,
            });
        }
        let mut undo = self.mul_accumulate(ctrl, mod_inverse(c, self.n));
        undo.reverse();
        out.extend(undo);
        out
    }
}

/// Repeated-squaring modular exponentiation. Registers `A`, `F` (product,
/// initialized to 1), `S1` (carries and flag), `S2` (accumulator and combined control).
pub fn build_modexp(spec: ModexpSpec) -> Result<CircuitProgram> {
    spec.validate()?;
    let l = spec.l;
    let la = spec.input_bits();
    let a_reg = Register::new("A", 0, la);
    let f_reg = Register::new("F", la, l);
    let s1 = Register::new("S1", la + l, l + 1);
    let s2 = Register::new("S2", la + 2 * l + 1, l + 2);
    let name = match spec.variant {
        ModexpVariant::Full => format!("f{}_long", spec.n),
        ModexpVariant::SingleMult => "mult".to_string(),
        ModexpVariant::A3Bit => format!("f{}_3bit", spec.n),
    };
    let arith = Arith {
        n: spec.n,
        product: f_reg.qubits(),
        carries: s1.qubits()[..l].to_vec(),
        flag: s1.qubit(l),
        acc: s2.qubits()[..=l].to_vec(),
        combo: s2.qubit(l + 1),
    };
    let mut p = CircuitProgram::new(
        name,
        spec.num_qubits(),
        vec![a_reg.clone(), f_reg.clone(), s1, s2],
    );
    p.initial_bits = 1 << f_reg.start;
    p.gates
        .extend(a_reg.qubits().into_iter().map(Gate::superpose));
    p.prep_len = p.gates.len();
    let factor = |j: usize| pow_mod(spec.x, 1 << j, spec.n);
    match spec.variant {
        ModexpVariant::Full | ModexpVariant::SingleMult => {
            for j in 0..la {
                p.gates
                    .extend(arith.controlled_multiply(a_reg.qubit(j), factor(j)));
            }
        }
        ModexpVariant::A3Bit => {
            for j in 0..3 {
                p.gates
                    .extend(arith.controlled_multiply(a_reg.qubit(j), factor(j)));
            }
            let reused = a_reg.qubit(2);
            for j in 3..=2 * l {
                p.gates.push(Gate::ReuseRenorm(reused));
                p.gates.push(Gate::superpose(reused));
                p.gates.extend(arith.controlled_multiply(reused, factor(j)));
            }
        }
    }
    p.validate()?;
    Ok(p)
}

/// Ideal disentangling rotation on `qubit`, then [`clear_and_renormalize`].
pub fn reuse_renorm<T: Scalar>(
    state: &mut QuantumState<T>,
    qubit: usize,
    support: Option<&Support>,
) -> Result<()> {
    apply_pulse(
        state,
        &PulseSpec::new(PulseKind::V, qubit, FRAC_PI_2, -FRAC_PI_2),
    )?;
    clear_and_renormalize(state, qubit, support)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroverSpec {
    pub key_bits: usize,
    pub key: u64,
    pub iterations: usize,
}

impl GroverSpec {
    /// Single marked key with the optimal iteration count.
    pub fn new(key_bits: usize, key: u64) -> Self {
        Self {
            key_bits,
            key,
            iterations: grover_iteration_count(1u64 << key_bits.min(63), 1),
        }
    }
}

/// `⌊π/4·√(N/t)⌋`, at least 1.
pub fn grover_iteration_count(space_size: u64, num_solutions: u64) -> usize {
    if num_solutions == 0 || space_size == 0 {
        return 1;
    }
    let k = (PI / 4.0 * (space_size as f64 / num_solutions as f64).sqrt()).floor() as usize;
    k.max(1)
}

pub fn build_grover(spec: GroverSpec) -> Result<CircuitProgram> {
    if spec.key_bits >= 1 && spec.key_bits < 63 && spec.key >> spec.key_bits != 0 {
        return Err(Error::InvalidArgument(format!(
            "key {} does not fit in {} bits",
            spec.key, spec.key_bits
        )));
    }
    build_grover_marked(spec.key_bits, &[spec.key], spec.iterations)
}

/// Grover search marking every value in `marked`. Registers `l`, `r`, `s`;
/// the target is the first marked value.
pub fn build_grover_marked(
    key_bits: usize,
    marked: &[u64],
    iterations: usize,
) -> Result<CircuitProgram> {
    if !(1..=20).contains(&key_bits) {
        return Err(Error::InvalidArgument(
            "key register must have 1..=20 qubits".into(),
        ));
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument(
            "Grover needs at least one iteration".into(),
        ));
    }
    if let Some(v) = marked.iter().find(|&&v| v >> key_bits != 0) {
        return Err(Error::InvalidArgument(format!(
            "marked value {v} does not fit in {key_bits} bits"
        )));
    }
    let l_reg = Register::new("l", 0, key_bits);
    let (r, s) = (key_bits, key_bits + 1);
    let mut p = CircuitProgram::new(
        "grover",
        key_bits + 2,
        vec![
            l_reg.clone(),
            Register::new("r", r, 1),
            Register::new("s", s, 1),
        ],
    );
    let l = l_reg.qubits();
    p.gates.extend(l.iter().map(|&q| Gate::superpose(q)));
    p.gates.push(Gate::SetBit(r));
    p.gates.push(Gate::Rotation {
        qubit: r,
        theta: FRAC_PI_2,
        phi: FRAC_PI_2,
    });
    p.gates.push(Gate::SetBit(s));
    p.prep_len = p.gates.len();

    let mut oracle = Vec::new();
    for &v in marked {
        let dress: Vec<Gate> = (0..key_bits)
            .filter(|b| v >> b & 1 == 0)
            .map(|b| Gate::not(l[b]))
            .collect();
        oracle.extend(dress.iter().cloned());
        oracle.extend(mcx(&l, r, &[s])?);
        oracle.extend(dress);
    }
    for _ in 0..iterations {
        p.gates.extend(oracle.iter().cloned());
        p.gates.extend(l.iter().map(|&q| Gate::Fourier(q)));
        p.gates.push(Gate::ReflectZero {
            qubits: l.clone(),
            ancilla: s,
        });
        p.gates.extend(l.iter().map(|&q| Gate::Fourier(q)));
    }
    p.target = marked.first().map(|&value| Target {
        register: "l".into(),
        value,
    });
    p.validate()?;
    Ok(p)
}
