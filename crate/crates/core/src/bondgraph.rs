//! Bond-graph netlists: parsing, causality, state space and ODE reduction.
//!
//! Netlist statements, one per line, `#` starts a comment:
//!
//! ```text
//! se <name> <Vmax> <f>
//! r <name> <ohms>
//! l <name> <henry>
//! c <name> <farad>
//! j0 <name>
//! j1 <name>
//! bond <from> <to>
//! output <name>
//! ```
//!
//! Bonds point in the direction of positive power. The output is the current
//! through a one-port element, taken positive into the element.

use std::collections::{HashMap, VecDeque};
use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};

use crate::circuit::LinearOde;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ElementKind {
    Se { vmax: f64, f: f64 },
    R(f64),
    C(f64),
    L(f64),
    Junction0,
    Junction1,
}

impl ElementKind {
    fn is_junction(&self) -> bool {
        matches!(self, ElementKind::Junction0 | ElementKind::Junction1)
    }

    fn keyword(&self) -> &'static str {
        match self {
            ElementKind::Se { .. } => "se",
            ElementKind::R(_) => "r",
            ElementKind::C(_) => "c",
            ElementKind::L(_) => "l",
            ElementKind::Junction0 => "j0",
            ElementKind::Junction1 => "j1",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Element {
    pub name: String,
    pub kind: ElementKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BondGraphSpec {
    pub elements: Vec<Element>,
    pub bonds: Vec<Bond>,
    pub output: usize,
}

impl BondGraphSpec {
    pub fn element(&self, name: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.name == name)
    }

    fn incident(&self, el: usize) -> Vec<usize> {
        (0..self.bonds.len())
            .filter(|&b| self.bonds[b].from == el || self.bonds[b].to == el)
            .collect()
    }

    fn source(&self) -> usize {
        self.elements
            .iter()
            .position(|e| matches!(e.kind, ElementKind::Se { .. }))
            .expect("validated spec has a source")
    }

    /// Canonical netlist text; parsing it back yields an equal spec.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        for e in &self.elements {
            let _ = match e.kind {
                ElementKind::Se { vmax, f } => writeln!(s, "se {} {vmax:?} {f:?}", e.name),
                ElementKind::R(v) | ElementKind::C(v) | ElementKind::L(v) => {
                    writeln!(s, "{} {} {v:?}", e.kind.keyword(), e.name)
                }
                _ => writeln!(s, "{} {}", e.kind.keyword(), e.name),
            };
        }
        for b in &self.bonds {
            let _ = writeln!(s, "bond {} {}", self.elements[b.from].name, self.elements[b.to].name);
        }
        let _ = writeln!(s, "output {}", self.elements[self.output].name);
        s
    }

    fn validate(&self) -> Result<()> {
        let sources = self.elements.iter().filter(|e| matches!(e.kind, ElementKind::Se { .. })).count();
        if sources != 1 {
            return Err(Error::Netlist(format!("expected exactly one se element, found {sources}")));
        }
        if !matches!(self.elements[self.output].kind, ElementKind::R(_) | ElementKind::L(_) | ElementKind::C(_)) {
            return Err(Error::Netlist(format!(
                "output {} is not an r, l or c element",
                self.elements[self.output].name
            )));
        }
        for (i, e) in self.elements.iter().enumerate() {
            let degree = self.incident(i).len();
            if e.kind.is_junction() {
                if degree < 2 {
                    return Err(Error::Netlist(format!("junction {} has {degree} bonds", e.name)));
                }
            } else if degree != 1 {
                return Err(Error::Netlist(format!("element {} must have exactly one bond, has {degree}", e.name)));
            }
        }
        if self.bonds.iter().any(|b| b.from == b.to) {
            return Err(Error::Netlist("bond from an element to itself".into()));
        }
        Ok(())
    }
}

fn parse_value(tok: &str, line: usize, what: &str) -> Result<f64> {
    let v: f64 = tok
        .parse()
        .map_err(|_| Error::Syntax { line, msg: format!("bad {what} '{tok}'") })?;
    if !v.is_finite() {
        return Err(Error::Syntax { line, msg: format!("{what} must be finite") });
    }
    Ok(v)
}

fn positive(v: f64, line: usize, what: &str) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Syntax { line, msg: format!("{what} must be positive, got {v}") })
    }
}

pub fn parse_netlist(text: &str) -> Result<BondGraphSpec> {
    let mut elements: Vec<Element> = Vec::new();
    let mut names: HashMap<String, usize> = HashMap::new();
    let mut raw_bonds: Vec<(usize, String, String)> = Vec::new();
    let mut output: Option<(usize, String)> = None;
    let mut last_line = 0;

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        last_line = line;
        let content = raw.split('#').next().unwrap_or("");
        let toks: Vec<&str> = content.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        let kw = toks[0].to_ascii_lowercase();
        let want = |n: usize| -> Result<()> {
            if toks.len() != n {
                Err(Error::Syntax { line, msg: format!("'{kw}' takes {} arguments, got {}", n - 1, toks.len() - 1) })
            } else {
                Ok(())
            }
        };
        let kind = match kw.as_str() {
            "se" => {
                want(4)?;
                let vmax = parse_value(toks[2], line, "amplitude")?;
                let f = positive(parse_value(toks[3], line, "frequency")?, line, "frequency")?;
                Some(ElementKind::Se { vmax, f })
            }
            "r" | "l" | "c" => {
                want(3)?;
                let v = positive(parse_value(toks[2], line, "value")?, line, "value")?;
                Some(match kw.as_str() {
                    "r" => ElementKind::R(v),
                    "l" => ElementKind::L(v),
                    _ => ElementKind::C(v),
                })
            }
            "j0" => {
                want(2)?;
                Some(ElementKind::Junction0)
            }
            "j1" => {
                want(2)?;
                Some(ElementKind::Junction1)
            }
            "bond" => {
                want(3)?;
                raw_bonds.push((line, toks[1].to_string(), toks[2].to_string()));
                None
            }
            "output" => {
                want(2)?;
                if output.is_some() {
                    return Err(Error::Syntax { line, msg: "duplicate output statement".into() });
                }
                output = Some((line, toks[1].to_string()));
                None
            }
            other => return Err(Error::Syntax { line, msg: format!("unknown statement '{other}'") }),
        };
        if let Some(kind) = kind {
            let name = toks[1].to_string();
            if names.contains_key(&name) {
                return Err(Error::Syntax { line, msg: format!("duplicate name '{name}'") });
            }
            names.insert(name.clone(), elements.len());
            elements.push(Element { name, kind });
        }
    }

    if elements.is_empty() {
        return Err(Error::Syntax { line: last_line.max(1), msg: "no elements declared".into() });
    }
    let mut bonds = Vec::with_capacity(raw_bonds.len());
    for (line, from, to) in raw_bonds {
        let lookup = |n: &str| {
            names
                .get(n)
                .copied()
                .ok_or_else(|| Error::Syntax { line, msg: format!("bond endpoint '{n}' is not declared") })
        };
        bonds.push(Bond { from: lookup(&from)?, to: lookup(&to)? });
    }
    let output = match output {
        Some((line, name)) => *names
            .get(&name)
            .ok_or_else(|| Error::Syntax { line, msg: format!("output '{name}' is not declared") })?,
        None => return Err(Error::Netlist("missing output statement".into())),
    };
    let spec = BondGraphSpec { elements, bonds, output };
    spec.validate()?;
    Ok(spec)
}

/// Which end of a bond imposes effort.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EffortSetter {
    From,
    To,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CausalBondGraph {
    pub spec: BondGraphSpec,
    pub effort: Vec<EffortSetter>,
    /// Storage elements, all in integral causality, in declaration order.
    pub states: Vec<usize>,
}

struct Causality<'a> {
    spec: &'a BondGraphSpec,
    effort: Vec<Option<EffortSetter>>,
}

impl<'a> Causality<'a> {
    fn end_of(&self, bond: usize, el: usize) -> EffortSetter {
        if self.spec.bonds[bond].from == el {
            EffortSetter::From
        } else {
            EffortSetter::To
        }
    }

    fn other(s: EffortSetter) -> EffortSetter {
        match s {
            EffortSetter::From => EffortSetter::To,
            EffortSetter::To => EffortSetter::From,
        }
    }

    /// Sets effort on `bond` to be decided by `el` (or by its partner when
    /// `el_sets` is false). Conflicting reassignment is an error.
    fn assign(&mut self, bond: usize, el: usize, el_sets: bool, queue: &mut VecDeque<usize>) -> Result<()> {
        let end = self.end_of(bond, el);
        let want = if el_sets { end } else { Self::other(end) };
        match self.effort[bond] {
            Some(cur) if cur != want => Err(Error::Causality(format!(
                "bond {} -> {} is over-constrained",
                self.spec.elements[self.spec.bonds[bond].from].name,
                self.spec.elements[self.spec.bonds[bond].to].name
            ))),
            Some(_) => Ok(()),
            None => {
                self.effort[bond] = Some(want);
                let b = self.spec.bonds[bond];
                queue.push_back(b.from);
                queue.push_back(b.to);
                Ok(())
            }
        }
    }

    fn propagate(&mut self, mut queue: VecDeque<usize>) -> Result<()> {
        while let Some(el) = queue.pop_front() {
            let kind = self.spec.elements[el].kind;
            if !kind.is_junction() {
                self.check_port(el)?;
                continue;
            }
            let bonds = self.spec.incident(el);
            // "special" bonds: effort imposed on a 0-junction, or decided by a 1-junction
            let special_when_junction_sets = matches!(kind, ElementKind::Junction1);
            let mut special = 0;
            let mut open = Vec::new();
            for &b in &bonds {
                match self.effort[b] {
                    None => open.push(b),
                    Some(s) => {
                        let junction_sets = s == self.end_of(b, el);
                        if junction_sets == special_when_junction_sets {
                            special += 1;
                        }
                    }
                }
            }
            let name = &self.spec.elements[el].name;
            if special > 1 {
                return Err(Error::Causality(format!("junction {name} has more than one causal-deciding bond")));
            }
            if special == 1 {
                for b in open {
                    self.assign(b, el, !special_when_junction_sets, &mut queue)?;
                }
            } else if open.len() == 1 {
                self.assign(open[0], el, special_when_junction_sets, &mut queue)?;
            } else if open.is_empty() {
                return Err(Error::Causality(format!("junction {name} has no causal-deciding bond")));
            }
        }
        Ok(())
    }

    fn check_port(&self, el: usize) -> Result<()> {
        let bond = self.spec.incident(el)[0];
        let Some(s) = self.effort[bond] else { return Ok(()) };
        let sets = s == self.end_of(bond, el);
        let e = &self.spec.elements[el];
        match e.kind {
            ElementKind::Se { .. } if !sets => Err(Error::Causality(format!("source {} cannot accept effort", e.name))),
            ElementKind::C(_) if !sets => {
                Err(Error::Causality(format!("capacitor {} forced into derivative causality", e.name)))
            }
            ElementKind::L(_) if sets => {
                Err(Error::Causality(format!("inductor {} forced into derivative causality", e.name)))
            }
            _ => Ok(()),
        }
    }
}

/// Sequential causality assignment: source, then storage in integral
/// causality, then resistors, propagating through junctions after each step.
pub fn assign_causality(spec: &BondGraphSpec) -> Result<CausalBondGraph> {
    spec.validate()?;
    let mut c = Causality { spec, effort: vec![None; spec.bonds.len()] };
    let ports: Vec<usize> = (0..spec.elements.len()).filter(|&i| !spec.elements[i].kind.is_junction()).collect();

    let src = spec.source();
    let mut q = VecDeque::new();
    c.assign(spec.incident(src)[0], src, true, &mut q)?;
    c.propagate(q)?;

    for pass in 0..2 {
        for &el in &ports {
            let bond = spec.incident(el)[0];
            if c.effort[bond].is_some() {
                continue;
            }
            let sets = match spec.elements[el].kind {
                ElementKind::C(_) if pass == 0 => true,
                ElementKind::L(_) if pass == 0 => false,
                ElementKind::R(_) if pass == 1 => false,
                _ => continue,
            };
            let mut q = VecDeque::new();
            c.assign(bond, el, sets, &mut q)?;
            c.propagate(q)?;
        }
    }

    let mut effort = Vec::with_capacity(spec.bonds.len());
    for (b, e) in c.effort.iter().enumerate() {
        match e {
            Some(s) => effort.push(*s),
            None => {
                let bd = spec.bonds[b];
                return Err(Error::Causality(format!(
                    "bond {} -> {} left without causality",
                    spec.elements[bd.from].name, spec.elements[bd.to].name
                )));
            }
        }
    }
    for j in 0..spec.elements.len() {
        if spec.elements[j].kind.is_junction() {
            c.propagate(VecDeque::from([j]))?;
        }
    }
    let states = ports
        .into_iter()
        .filter(|&i| matches!(spec.elements[i].kind, ElementKind::C(_) | ElementKind::L(_)))
        .collect();
    Ok(CausalBondGraph { spec: spec.clone(), effort, states })
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateSpace {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub d: f64,
    /// `p_<name>` for inductor fluxes, `q_<name>` for capacitor charges.
    pub labels: Vec<String>,
}

impl StateSpace {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, c: DVector<f64>, d: f64) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || b.len() != n || c.len() != n {
            return Err(Error::StateSpace(format!(
                "inconsistent shapes A {}x{}, B {}, C {}",
                n,
                a.ncols(),
                b.len(),
                c.len()
            )));
        }
        let labels = (0..n).map(|i| format!("x{i}")).collect();
        Ok(Self { a, b, c, d, labels })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }
}

/// Builds `x' = A x + B u`, `y = C x + D u` by solving the junction and
/// constitutive relations for every bond effort and flow.
pub fn derive_state_space(cbg: &CausalBondGraph) -> Result<StateSpace> {
    let spec = &cbg.spec;
    let nb = spec.bonds.len();
    let n = cbg.states.len();
    let state_of: HashMap<usize, usize> = cbg.states.iter().enumerate().map(|(i, &el)| (el, i)).collect();
    // unknowns: e_b at b, f_b at nb + b; right-hand side columns: states then u
    let mut m = DMatrix::<f64>::zeros(2 * nb, 2 * nb);
    let mut rhs = DMatrix::<f64>::zeros(2 * nb, n + 1);
    let mut row = 0;
    let inward = |b: usize, el: usize| if spec.bonds[b].to == el { 1.0 } else { -1.0 };

    for (el, e) in spec.elements.iter().enumerate() {
        let bonds = spec.incident(el);
        match e.kind {
            ElementKind::Se { .. } => {
                m[(row, bonds[0])] = 1.0;
                rhs[(row, n)] = 1.0;
                row += 1;
            }
            ElementKind::R(r) => {
                let b = bonds[0];
                m[(row, b)] = 1.0;
                m[(row, nb + b)] = -r * inward(b, el);
                row += 1;
            }
            ElementKind::C(cap) => {
                let b = bonds[0];
                m[(row, b)] = 1.0;
                rhs[(row, state_of[&el])] = 1.0 / cap;
                row += 1;
            }
            ElementKind::L(ind) => {
                let b = bonds[0];
                m[(row, nb + b)] = inward(b, el);
                rhs[(row, state_of[&el])] = 1.0 / ind;
                row += 1;
            }
            ElementKind::Junction0 | ElementKind::Junction1 => {
                let (common, summed) = if e.kind == ElementKind::Junction0 { (0, nb) } else { (nb, 0) };
                for w in bonds.windows(2) {
                    m[(row, common + w[0])] = 1.0;
                    m[(row, common + w[1])] = -1.0;
                    row += 1;
                }
                for &b in &bonds {
                    m[(row, summed + b)] = inward(b, el);
                }
                row += 1;
            }
        }
    }
    debug_assert_eq!(row, 2 * nb);

    let sol = m
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::StateSpace("junction equations are singular".into()))?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::StateSpace("non-finite solution of junction equations".into()));
    }

    let mut a = DMatrix::zeros(n, n);
    let mut bvec = DVector::zeros(n);
    let mut labels = Vec::with_capacity(n);
    for (i, &el) in cbg.states.iter().enumerate() {
        let b = spec.incident(el)[0];
        let (src_row, sign, label) = match spec.elements[el].kind {
            ElementKind::C(_) => (nb + b, inward(b, el), "q"),
            _ => (b, 1.0, "p"),
        };
        for j in 0..n {
            a[(i, j)] = sign * sol[(src_row, j)];
        }
        bvec[i] = sign * sol[(src_row, n)];
        labels.push(format!("{label}_{}", spec.elements[el].name));
    }
    let ob = spec.incident(spec.output)[0];
    let osign = inward(ob, spec.output);
    let cvec = DVector::from_iterator(n, (0..n).map(|j| osign * sol[(nb + ob, j)]));
    let d = osign * sol[(nb + ob, n)];
    Ok(StateSpace { a, b: bvec, c: cvec, d, labels })
}

/// Monic characteristic polynomial of `A` (ascending coefficients) and the
/// adjugate terms `M_1..M_n` with `adj(sI - A) = sum_k M_k s^(n-k)`.
pub fn faddeev_leverrier(a: &DMatrix<f64>) -> (Vec<f64>, Vec<DMatrix<f64>>) {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let mut c = vec![0.0; n + 1];
    c[n] = 1.0;
    let mut ms = Vec::with_capacity(n);
    let mut prev = DMatrix::<f64>::zeros(n, n);
    for k in 1..=n {
        let mk = a * &prev + &id * c[n - k + 1];
        c[n - k] = -(a * &mk).trace() / k as f64;
        prev = mk.clone();
        ms.push(mk);
    }
    (c, ms)
}

/// Transfer-function numerator and denominator (ascending coefficients).
pub fn transfer_polynomials(ss: &StateSpace) -> (Vec<f64>, Vec<f64>) {
    let n = ss.dim();
    let (den, ms) = faddeev_leverrier(&ss.a);
    let mut num: Vec<f64> = den.iter().map(|c| ss.d * c).collect();
    for (k, mk) in ms.iter().enumerate() {
        // M_{k+1} multiplies s^(n-k-1)
        num[n - k - 1] += (ss.c.transpose() * mk * &ss.b)[(0, 0)];
    }
    (num, den)
}

/// `den(d/dt) y = num(d/dt) u`, trailing zero forcing terms dropped.
pub fn state_space_to_ode(ss: &StateSpace) -> Result<LinearOde> {
    if ss.dim() == 0 {
        return Err(Error::StateSpace(format!(
            "static system (y = {} u) has no differential equation",
            ss.d
        )));
    }
    let (mut num, den) = transfer_polynomials(ss);
    while num.len() > 1 && num.last() == Some(&0.0) {
        num.pop();
    }
    LinearOde::new(den, num)
}

/// Largest coefficient mismatch after normalising both equations by their
/// leading lhs coefficient, relative to the size of the reference vector.
pub fn projective_mismatch(derived: &LinearOde, reference: &LinearOde) -> f64 {
    fn rel(a: &[f64], sa: f64, b: &[f64], sb: f64) -> f64 {
        let len = a.len().max(b.len());
        let at = |v: &[f64], i: usize, s: f64| v.get(i).copied().unwrap_or(0.0) / s;
        let scale = (0..len).map(|i| at(b, i, sb).abs()).fold(0.0, f64::max);
        let err = (0..len).map(|i| (at(a, i, sa) - at(b, i, sb)).abs()).fold(0.0, f64::max);
        if scale > 0.0 {
            err / scale
        } else {
            err
        }
    }
    if derived.order() != reference.order() {
        return f64::INFINITY;
    }
    let (sa, sb) = (derived.leading(), reference.leading());
    rel(derived.lhs(), sa, reference.lhs(), sb).max(rel(derived.forcing(), sa, reference.forcing(), sb))
}

/// Netlist text to ODE in one call.
pub fn derive_ode(text: &str) -> Result<LinearOde> {
    let spec = parse_netlist(text)?;
    let cbg = assign_causality(&spec)?;
    state_space_to_ode(&derive_state_space(&cbg)?)
}

/// Series R-L-C loop driven by a sinusoidal source, the class-1 topology.
pub fn series_rlc_netlist(r: f64, l: f64, c: f64, vmax: f64, f: f64) -> String {
    format!(
        "se V {vmax:?} {f:?}\nj1 j1\nr Rload {r:?}\nl L1 {l:?}\nc C1 {c:?}\n\
         bond V j1\nbond j1 Rload\nbond j1 L1\nbond j1 C1\noutput Rload\n"
    )
}
