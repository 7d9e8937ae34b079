//! Masa/Cartan verdicts assembled from the structural condition checks.
//!
//! The decision rules only ever fire on certified hypotheses; matrix-level
//! evidence is attached for inspection but never decides anything. A
//! depth-bounded "no violation found" is treated as undecided, so the
//! engine prefers an honest inconclusive over an optimistic true.

use crate::conditions::{
    check_clopen_iterated_image, check_embeddings, check_essential_freeness,
    check_graph_separation, check_open_set_condition, construct_left_inverse, ConditionError,
    ConditionResult, Method, SigmaResult, Tri,
};
use crate::ifs::AffineIfs;
use thiserror::Error;

pub const CITE_NOT_MASA: [&str; 2] = ["Lem 6.1.1", "Thm 6.1.2"];
pub const CITE_MASA: &str = "Thm 6.1.4";
pub const CITE_CARTAN: &str = "Thm 6.2.1";

#[derive(Debug, Error)]
pub enum VerdictError {
    #[error("hypothesis ledger incomplete: missing {}", missing.join(", "))]
    Incomplete { missing: Vec<String> },
    #[error("internal contradiction: {0}")]
    Contradiction(String),
    #[error(transparent)]
    Condition(#[from] ConditionError),
}

/// Results of every structural check, gathered before judgement. A `None`
/// entry means the check was never run; evaluation refuses to proceed.
#[derive(Debug, Clone, Default)]
pub struct HypothesisLedger {
    pub embeddings: Option<ConditionResult>,
    pub osc: Option<ConditionResult>,
    pub clopen_images: Option<ConditionResult>,
    pub sigma: Option<SigmaResult>,
    pub essentially_free: Option<ConditionResult>,
    pub graph_separation: Option<ConditionResult>,
    pub seed_refinement: Option<SeedSummary>,
}

/// What seed refinement did, for the report.
#[derive(Debug, Clone)]
pub struct SeedSummary {
    pub kept: usize,
    pub removed: usize,
    pub depth: u32,
}

/// Advisory matrix-level test summary attached to the verdict.
#[derive(Debug, Clone, Default)]
pub struct Evidence {
    pub identity_checks_passed: usize,
    pub identity_checks_failed: usize,
    /// Nonzero diagonal entries found in off-degree components; must be
    /// zero on any refined basis.
    pub off_degree_diagonal_nonzero: usize,
    pub notes: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MasaVerdict {
    True,
    False,
    Inconclusive,
}

impl MasaVerdict {
    pub fn label(self) -> &'static str {
        match self {
            MasaVerdict::True => "true",
            MasaVerdict::False => "false",
            MasaVerdict::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CartanVerdict {
    True,
    False,
    Inconclusive,
    NotApplicable,
}

impl CartanVerdict {
    pub fn label(self) -> &'static str {
        match self {
            CartanVerdict::True => "true",
            CartanVerdict::False => "false",
            CartanVerdict::Inconclusive => "inconclusive",
            CartanVerdict::NotApplicable => "not-applicable",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Verdict {
    pub masa: MasaVerdict,
    pub cartan: CartanVerdict,
    /// Citations backing every decided component.
    pub applied: Vec<String>,
    /// Hypotheses that blocked a decision, when one is inconclusive.
    pub failed_hypotheses: Vec<String>,
    pub evidence: Option<Evidence>,
    pub notes: String,
}

/// Runs every structural check and collects the outcomes. A system
/// without a candidate open set gets `osc.holds = unknown` rather than an
/// error, so the verdict degrades to inconclusive instead of failing.
pub fn gather_ledger(
    ifs: &AffineIfs,
    depth: u32,
    resolution: u32,
) -> Result<HypothesisLedger, ConditionError> {
    let osc = match check_open_set_condition(ifs, None, resolution) {
        Ok(r) => r,
        Err(ConditionError::OpenSetRequired) => ConditionResult {
            holds: Tri::Unknown,
            witness: None,
            method: Method::UserAsserted,
            resolution: None,
            notes: "no candidate open set was supplied".into(),
        },
        Err(e) => return Err(e),
    };
    let sigma = match construct_left_inverse(ifs) {
        Ok(s) => s,
        Err(e @ ConditionError::NotInvertible { .. })
        | Err(e @ ConditionError::Unsupported(_)) => SigmaResult {
            branches: Vec::new(),
            consistent: false,
            overlap_witnesses: Vec::new(),
            notes: format!("left inverse could not be constructed: {e}"),
        },
        Err(e) => return Err(e),
    };
    Ok(HypothesisLedger {
        embeddings: Some(check_embeddings(ifs)),
        osc: Some(osc),
        clopen_images: Some(check_clopen_iterated_image(ifs, depth.max(1))),
        sigma: Some(sigma),
        essentially_free: Some(check_essential_freeness(ifs, depth)?),
        graph_separation: Some(check_graph_separation(ifs)?),
        seed_refinement: None,
    })
}

fn complete(
    ledger: &HypothesisLedger,
) -> Result<
    (
        &ConditionResult,
        &ConditionResult,
        &ConditionResult,
        &SigmaResult,
        &ConditionResult,
        &ConditionResult,
    ),
    VerdictError,
> {
    let mut missing = Vec::new();
    if ledger.embeddings.is_none() {
        missing.push("embeddings".to_string());
    }
    if ledger.osc.is_none() {
        missing.push("osc".to_string());
    }
    if ledger.clopen_images.is_none() {
        missing.push("clopen_images".to_string());
    }
    if ledger.sigma.is_none() {
        missing.push("sigma".to_string());
    }
    if ledger.essentially_free.is_none() {
        missing.push("essentially_free".to_string());
    }
    if ledger.graph_separation.is_none() {
        missing.push("graph_separation".to_string());
    }
    if !missing.is_empty() {
        return Err(VerdictError::Incomplete { missing });
    }
    Ok((
        ledger.embeddings.as_ref().unwrap(),
        ledger.osc.as_ref().unwrap(),
        ledger.clopen_images.as_ref().unwrap(),
        ledger.sigma.as_ref().unwrap(),
        ledger.essentially_free.as_ref().unwrap(),
        ledger.graph_separation.as_ref().unwrap(),
    ))
}

fn tri_word(t: Tri) -> &'static str {
    match t {
        Tri::True => "holds",
        Tri::False => "fails",
        Tri::Unknown => "undecided",
    }
}

/// Applies the decision rules, in order:
///
/// (a) embeddings and the open set condition hold and the system is
///     certified not essentially free ⇒ the diagonal is not maximal
///     abelian; the Cartan question does not arise.
/// (b) embeddings, open set condition, clopen iterated images, a
///     consistent left inverse and certified essential freeness ⇒ the
///     diagonal is a masa; graph separation then decides Cartan.
/// (c) anything else is inconclusive, naming the blocking hypotheses.
///
/// Evidence disagreeing with a rule-(b) conclusion (a nonzero diagonal in
/// an off-degree component) is an internal error, never a verdict.
pub fn evaluate_verdict(
    ifs: &AffineIfs,
    ledger: &HypothesisLedger,
    evidence: Option<Evidence>,
) -> Result<Verdict, VerdictError> {
    let (embeddings, osc, clopen, sigma, free, sep) = complete(ledger)?;
    let n = ifs.n_maps();

    let mut blockers: Vec<String> = Vec::new();
    for (name, r) in [("embeddings", embeddings), ("osc", osc)] {
        if r.holds != Tri::True {
            blockers.push(name.to_string());
        }
    }

    if blockers.is_empty() && free.holds == Tri::False {
        // Rule (a): a failure of essential freeness under the open set
        // condition rules out maximality.
        let verdict = Verdict {
            masa: MasaVerdict::False,
            cartan: CartanVerdict::NotApplicable,
            applied: CITE_NOT_MASA.iter().map(|s| s.to_string()).collect(),
            failed_hypotheses: Vec::new(),
            evidence,
            notes: format!(
                "the {n}-map system is not essentially free ({}); \
                 the non-masa conclusion is read under the open set \
                 condition hypothesis, which was verified",
                free.notes
            ),
        };
        return Ok(verdict);
    }

    if blockers.is_empty() && free.holds == Tri::True {
        if clopen.holds != Tri::True {
            blockers.push("clopen_images".to_string());
        }
        if !sigma.consistent {
            blockers.push("sigma".to_string());
        }
        if blockers.is_empty() {
            // Rule (b): all hypotheses certified.
            if let Some(ev) = &evidence {
                if ev.off_degree_diagonal_nonzero > 0 {
                    return Err(VerdictError::Contradiction(format!(
                        "{} nonzero diagonal entries in off-degree components \
                         on a refined basis, despite all masa hypotheses holding",
                        ev.off_degree_diagonal_nonzero
                    )));
                }
            }
            let mut applied = vec![CITE_MASA.to_string()];
            let (cartan, failed) = match sep.holds {
                Tri::True => {
                    applied.push(CITE_CARTAN.to_string());
                    (CartanVerdict::True, Vec::new())
                }
                Tri::False => {
                    applied.push(CITE_CARTAN.to_string());
                    (CartanVerdict::False, Vec::new())
                }
                Tri::Unknown => (
                    CartanVerdict::Inconclusive,
                    vec!["graph_separation".to_string()],
                ),
            };
            let notes = match cartan {
                CartanVerdict::True => format!(
                    "all masa hypotheses verified for the {n}-map system; \
                     the branch graphs are pairwise disjoint"
                ),
                CartanVerdict::False => format!(
                    "all masa hypotheses verified for the {n}-map system; \
                     graph separation fails ({})",
                    sep.notes
                ),
                _ => format!(
                    "all masa hypotheses verified for the {n}-map system; \
                     graph separation is undecided ({})",
                    sep.notes
                ),
            };
            return Ok(Verdict {
                masa: MasaVerdict::True,
                cartan,
                applied,
                failed_hypotheses: failed,
                evidence,
                notes,
            });
        }
    } else if blockers.is_empty() {
        // Gate passed but essential freeness is undecided.
        blockers.push("essentially_free".to_string());
    }

    let detail: Vec<String> = [
        ("embeddings", embeddings.holds),
        ("osc", osc.holds),
        ("clopen_images", clopen.holds),
        (
            "sigma",
            if sigma.consistent { Tri::True } else { Tri::False },
        ),
        ("essentially_free", free.holds),
        ("graph_separation", sep.holds),
    ]
    .iter()
    .map(|(name, t)| format!("{name}: {}", tri_word(*t)))
    .collect();
    Ok(Verdict {
        masa: MasaVerdict::Inconclusive,
        cartan: CartanVerdict::Inconclusive,
        applied: Vec::new(),
        failed_hypotheses: blockers,
        evidence,
        notes: format!(
            "no decision rule applies to the {n}-map system; {}",
            detail.join("; ")
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ifs::{AffineMap, OpenSetSpec, SpaceDescriptor};
    use crate::scalar::{rat, rat_int};

    fn interval() -> SpaceDescriptor {
        SpaceDescriptor::Interval {
            lo: rat_int(0),
            hi: rat_int(1),
        }
    }

    fn open_unit() -> Option<OpenSetSpec> {
        Some(OpenSetSpec {
            pieces: vec![vec![(rat_int(0), rat_int(1))]],
        })
    }

    fn half_maps() -> AffineIfs {
        AffineIfs::new(
            interval(),
            vec![
                AffineMap::one_d(rat(1, 2), rat_int(0)),
                AffineMap::one_d(rat(-1, 2), rat_int(1)),
            ],
            open_unit(),
        )
        .unwrap()
    }

    fn cantor_pair() -> AffineIfs {
        AffineIfs::new(
            SpaceDescriptor::CantorTernary,
            vec![
                AffineMap::one_d(rat(1, 3), rat_int(0)),
                AffineMap::one_d(rat(1, 3), rat(2, 3)),
            ],
            open_unit(),
        )
        .unwrap()
    }

    fn asserted(holds: Tri) -> ConditionResult {
        ConditionResult {
            holds,
            witness: None,
            method: Method::UserAsserted,
            resolution: None,
            notes: String::new(),
        }
    }

    fn sigma_asserted(consistent: bool) -> SigmaResult {
        SigmaResult {
            branches: Vec::new(),
            consistent,
            overlap_witnesses: Vec::new(),
            notes: String::new(),
        }
    }

    fn synthetic(states: [Tri; 5], sigma_ok: bool) -> HypothesisLedger {
        HypothesisLedger {
            embeddings: Some(asserted(states[0])),
            osc: Some(asserted(states[1])),
            clopen_images: Some(asserted(states[2])),
            sigma: Some(sigma_asserted(sigma_ok)),
            essentially_free: Some(asserted(states[3])),
            graph_separation: Some(asserted(states[4])),
            seed_refinement: None,
        }
    }

    #[test]
    fn half_maps_are_masa_but_not_cartan() {
        let ifs = half_maps();
        let ledger = gather_ledger(&ifs, 3, 6).unwrap();
        let v = evaluate_verdict(&ifs, &ledger, None).unwrap();
        assert_eq!(v.masa, MasaVerdict::True);
        assert_eq!(v.cartan, CartanVerdict::False);
        assert_eq!(v.applied, vec!["Thm 6.1.4", "Thm 6.2.1"]);
        assert!(v.failed_hypotheses.is_empty());
    }

    #[test]
    fn cantor_pair_is_masa_and_cartan() {
        let ifs = cantor_pair();
        let ledger = gather_ledger(&ifs, 3, 6).unwrap();
        let v = evaluate_verdict(&ifs, &ledger, None).unwrap();
        assert_eq!(v.masa, MasaVerdict::True);
        assert_eq!(v.cartan, CartanVerdict::True);
        assert_eq!(v.applied, vec!["Thm 6.1.4", "Thm 6.2.1"]);
    }

    #[test]
    fn duplicated_maps_are_inconclusive_blocked_by_osc() {
        let ifs = AffineIfs::new(
            interval(),
            vec![
                AffineMap::one_d(rat(1, 2), rat_int(0)),
                AffineMap::one_d(rat(1, 2), rat_int(0)),
            ],
            open_unit(),
        )
        .unwrap();
        let ledger = gather_ledger(&ifs, 3, 6).unwrap();
        assert_eq!(ledger.osc.as_ref().unwrap().holds, Tri::False);
        assert_eq!(ledger.essentially_free.as_ref().unwrap().holds, Tri::False);
        let v = evaluate_verdict(&ifs, &ledger, None).unwrap();
        assert_eq!(v.masa, MasaVerdict::Inconclusive);
        assert_eq!(v.cartan, CartanVerdict::Inconclusive);
        assert_eq!(v.failed_hypotheses, vec!["osc"]);
        assert!(v.applied.is_empty());
    }

    #[test]
    fn identity_system_is_certified_not_masa() {
        // A single identity map: the open set condition holds vacuously,
        // but the empty word and the word (1) induce the same map.
        let ifs = AffineIfs::new(
            interval(),
            vec![AffineMap::one_d(rat_int(1), rat_int(0))],
            open_unit(),
        )
        .unwrap();
        let ledger = gather_ledger(&ifs, 3, 6).unwrap();
        assert_eq!(ledger.essentially_free.as_ref().unwrap().holds, Tri::False);
        let v = evaluate_verdict(&ifs, &ledger, None).unwrap();
        assert_eq!(v.masa, MasaVerdict::False);
        assert_eq!(v.cartan, CartanVerdict::NotApplicable);
        assert_eq!(v.applied, vec!["Lem 6.1.1", "Thm 6.1.2"]);
    }

    #[test]
    fn missing_checks_are_refused_by_name() {
        let mut ledger = synthetic([Tri::True; 5], true);
        ledger.osc = None;
        ledger.sigma = None;
        let err = evaluate_verdict(&half_maps(), &ledger, None).unwrap_err();
        match err {
            VerdictError::Incomplete { missing } => {
                assert_eq!(missing, vec!["osc", "sigma"]);
            }
            other => panic!("expected Incomplete, got {other:?}"),
        }
    }

    #[test]
    fn contradictory_evidence_is_a_hard_error() {
        let ifs = cantor_pair();
        let ledger = gather_ledger(&ifs, 3, 6).unwrap();
        let bad = Evidence {
            identity_checks_passed: 10,
            identity_checks_failed: 0,
            off_degree_diagonal_nonzero: 1,
            notes: String::new(),
        };
        let err = evaluate_verdict(&ifs, &ledger, Some(bad)).unwrap_err();
        assert!(matches!(err, VerdictError::Contradiction(_)));

        // The same evidence is harmless when no masa conclusion fires.
        let blocked = synthetic([Tri::True, Tri::False, Tri::True, Tri::False, Tri::True], true);
        let bad = Evidence {
            off_degree_diagonal_nonzero: 1,
            ..Default::default()
        };
        let v = evaluate_verdict(&ifs, &blocked, Some(bad)).unwrap();
        assert_eq!(v.masa, MasaVerdict::Inconclusive);
    }

    #[test]
    fn unknown_graph_separation_leaves_cartan_open() {
        let ledger = synthetic(
            [Tri::True, Tri::True, Tri::True, Tri::True, Tri::Unknown],
            true,
        );
        let v = evaluate_verdict(&half_maps(), &ledger, None).unwrap();
        assert_eq!(v.masa, MasaVerdict::True);
        assert_eq!(v.cartan, CartanVerdict::Inconclusive);
        assert_eq!(v.applied, vec!["Thm 6.1.4"]);
        assert_eq!(v.failed_hypotheses, vec!["graph_separation"]);
    }

    #[test]
    fn verdicts_are_monotone_under_certification() {
        let states = [Tri::True, Tri::False, Tri::Unknown];
        let ifs = half_maps();
        let mut ledgers = Vec::new();
        for a in states {
            for b in states {
                for c in states {
                    for d in states {
                        for e in states {
                            for s in [true, false] {
                                ledgers.push(([a, b, c, d, e], s));
                            }
                        }
                    }
                }
            }
        }
        for (tri, s) in ledgers {
            let base = evaluate_verdict(&ifs, &synthetic(tri, s), None).unwrap();
            // Cartan = true always entails masa = true.
            if base.cartan == CartanVerdict::True {
                assert_eq!(base.masa, MasaVerdict::True);
            }
            // Decided components carry citations; inconclusive ones carry
            // blocker names.
            if base.masa != MasaVerdict::Inconclusive {
                assert!(!base.applied.is_empty());
            } else {
                assert!(!base.failed_hypotheses.is_empty());
            }
            // Upgrading any single undecided hypothesis to certified never
            // flips a decided boolean.
            for i in 0..5 {
                if tri[i] != Tri::Unknown {
                    continue;
                }
                let mut up = tri;
                up[i] = Tri::True;
                let next = evaluate_verdict(&ifs, &synthetic(up, s), None).unwrap();
                if base.masa != MasaVerdict::Inconclusive {
                    assert_eq!(base.masa, next.masa, "masa flipped on upgrade {tri:?} -> {up:?}");
                }
                if matches!(base.cartan, CartanVerdict::True | CartanVerdict::False) {
                    assert!(
                        next.cartan == base.cartan || next.cartan == CartanVerdict::NotApplicable,
                        "cartan flipped on upgrade {tri:?} -> {up:?}"
                    );
                }
            }
        }
    }
}
