use std::collections::BTreeSet;

use super::term::{match_term, Rule, Signature, Subst, Term};

pub const DEFAULT_TERM_DEPTH: usize = 4;

/// Result of a derivability check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivation {
    /// Held directly or obtained by destructor analysis.
    Known,
    /// Built with public constructors from derivable parts.
    Built,
    /// Would be buildable but exceeds the depth cap.
    Clipped,
    No,
}

impl Derivation {
    pub fn ok(self) -> bool {
        matches!(self, Derivation::Known | Derivation::Built)
    }
}

/// Attacker knowledge, kept in analyzed normal form: the set holds received
/// terms closed under destructor rules, and constructor closure up to the
/// depth cap is answered on demand by [`Knowledge::derive`].
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Knowledge {
    analyzed: BTreeSet<Term>,
}

impl Knowledge {
    pub fn empty() -> Self {
        Knowledge { analyzed: BTreeSet::new() }
    }

    pub fn analyzed(&self) -> &BTreeSet<Term> {
        &self.analyzed
    }

    pub fn derive(&self, t: &Term, sig: &Signature, depth_cap: usize) -> Derivation {
        if self.analyzed.contains(t) {
            return Derivation::Known;
        }
        match t {
            Term::App(f, args) if sig.is_public_ctor(f) => {
                let mut clipped = t.depth() > depth_cap;
                for a in args.iter() {
                    match self.derive(a, sig, depth_cap) {
                        Derivation::No => return Derivation::No,
                        Derivation::Clipped => clipped = true,
                        _ => {}
                    }
                }
                if clipped {
                    Derivation::Clipped
                } else {
                    Derivation::Built
                }
            }
            _ => Derivation::No,
        }
    }

    pub fn contains(&self, t: &Term, sig: &Signature, depth_cap: usize) -> bool {
        self.derive(t, sig, depth_cap).ok()
    }

    /// Adds terms and re-analyzes. Returns whether anything new was learned.
    pub fn extend(&mut self, terms: impl IntoIterator<Item = Term>, sig: &Signature, depth_cap: usize) -> bool {
        let mut changed = false;
        for t in terms {
            changed |= self.analyzed.insert(t);
        }
        if changed {
            self.analyze(sig, depth_cap);
        }
        changed
    }

    fn analyze(&mut self, sig: &Signature, depth_cap: usize) {
        loop {
            let mut fresh = Vec::new();
            for rule in sig.rules.values() {
                // a non-variable pattern position is matched against held
                // terms; the remaining arguments must be derivable
                for (pos, held) in pattern_positions(rule).flat_map(|p| self.analyzed.iter().map(move |h| (p, h))) {
                    let mut s = Subst::new();
                    if !match_term(&rule.lhs[pos], held, &mut s) {
                        continue;
                    }
                    let mut ok = true;
                    for (i, p) in rule.lhs.iter().enumerate() {
                        if i == pos {
                            continue;
                        }
                        let inst = p.subst(&s);
                        if inst.is_ground() {
                            ok &= self.contains(&inst, sig, depth_cap);
                        } else {
                            ok = false;
                        }
                        if !ok {
                            break;
                        }
                    }
                    if !ok {
                        continue;
                    }
                    let out = rule.rhs.subst(&s);
                    if out.is_ground() && !self.analyzed.contains(&out) {
                        fresh.push(out);
                    }
                }
            }
            if fresh.is_empty() {
                return;
            }
            self.analyzed.extend(fresh);
        }
    }
}

fn pattern_positions(rule: &Rule) -> impl Iterator<Item = usize> + '_ {
    rule.lhs.iter().enumerate().filter(|(_, p)| !matches!(p, Term::Var(_))).map(|(i, _)| i)
}

/// Closure of `initial` under the signature, in analyzed form.
pub fn saturate(initial: impl IntoIterator<Item = Term>, sig: &Signature, depth_cap: usize) -> Knowledge {
    let mut k = Knowledge::empty();
    k.extend(initial, sig, depth_cap.max(1));
    k
}

/// Explains how `target` is obtained from `k`, one line per step.
pub fn derivation_steps(k: &Knowledge, target: &Term, sig: &Signature, depth_cap: usize) -> Vec<String> {
    let mut base = Knowledge::empty();
    let mut steps = Vec::new();
    // replay analysis from the non-derived core to recover the order
    let mut pending: Vec<Term> = k.analyzed.iter().cloned().collect();
    base.analyzed.extend(pending.drain(..).filter(|t| !derived_by_rule(k, t, sig, depth_cap)));
    loop {
        let before = base.analyzed.len();
        for rule in sig.rules.values() {
            let held: Vec<Term> = base.analyzed.iter().cloned().collect();
            for (pos, h) in pattern_positions(rule).flat_map(|p| held.iter().map(move |h| (p, h))) {
                let mut s = Subst::new();
                if !match_term(&rule.lhs[pos], h, &mut s) {
                    continue;
                }
                let others: Vec<Term> = rule.lhs.iter().map(|p| p.subst(&s)).collect();
                if others.iter().all(|o| o.is_ground() && base.contains(o, sig, depth_cap)) {
                    let out = rule.rhs.subst(&s);
                    if out.is_ground() && base.analyzed.insert(out.clone()) {
                        let args = others.iter().map(Term::to_string).collect::<Vec<_>>().join(", ");
                        steps.push(format!("{}({args}) = {out}", rule.name));
                    }
                }
            }
        }
        if base.analyzed.len() == before {
            break;
        }
    }
    if !k.analyzed.contains(target) {
        steps.push(format!("build {target} with public constructors"));
    }
    steps
}

fn derived_by_rule(k: &Knowledge, t: &Term, sig: &Signature, depth_cap: usize) -> bool {
    // a term counts as derived when some rule yields it from other held terms
    sig.rules.values().any(|rule| {
        pattern_positions(rule).any(|pos| {
            k.analyzed.iter().filter(|h| *h != t).any(|h| {
                let mut s = Subst::new();
                match_term(&rule.lhs[pos], h, &mut s)
                    && rule.rhs.subst(&s) == *t
                    && rule.lhs.iter().all(|p| {
                        let i = p.subst(&s);
                        i.is_ground() && k.contains(&i, sig, depth_cap)
                    })
            })
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verifier::term::Rule;

    fn sig() -> Signature {
        let mut s = Signature::default();
        s.ctors.insert("senc".into(), (2, false));
        s.ctors.insert("h".into(), (1, false));
        let v = |x: &str| Term::Var(x.into());
        s.rules.insert(
            "sdec".into(),
            Rule { name: "sdec".into(), lhs: vec![Term::app("senc", vec![v("x"), v("y")]), v("y")], rhs: v("x") },
        );
        s
    }

    fn senc(a: Term, b: Term) -> Term {
        Term::app("senc", vec![a, b])
    }

    #[test]
    fn one_destructor_step() {
        let (m, k) = (Term::name("m"), Term::name("k"));
        let kn = saturate([senc(m.clone(), k.clone()), k], &sig(), 4);
        assert!(kn.contains(&m, &sig(), 4));
        let kn = saturate([senc(m.clone(), Term::name("k"))], &sig(), 4);
        assert!(!kn.contains(&m, &sig(), 4));
    }

    #[test]
    fn mac_derived_key() {
        let mac = Term::name("mac");
        let p = Term::name("p");
        let c = senc(p.clone(), Term::app("h", vec![mac.clone()]));
        let kn = saturate([c, mac], &sig(), 4);
        assert!(kn.contains(&p, &sig(), 4));
        let steps = derivation_steps(&kn, &p, &sig(), 4);
        assert_eq!(steps, ["sdec(senc(p, h(mac)), h(mac)) = p"]);
    }

    #[test]
    fn late_key_unlocks_earlier_ciphertext() {
        let mut kn = saturate([senc(Term::name("m"), Term::name("k"))], &sig(), 4);
        assert!(kn.extend([Term::name("k")], &sig(), 4));
        assert!(kn.analyzed().contains(&Term::name("m")));
    }

    #[test]
    fn depth_cap_clips() {
        let kn = saturate([Term::name("a")], &sig(), 2);
        let deep = Term::app("h", vec![Term::app("h", vec![Term::name("a")])]);
        assert_eq!(kn.derive(&deep, &sig(), 2), Derivation::Clipped);
        assert_eq!(kn.derive(&deep, &sig(), 3), Derivation::Built);
    }
}
