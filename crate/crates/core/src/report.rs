//! Report assembly: the JSON schema emitted by the CLI, its text
//! rendering, and exit-code policy.

use crate::conditions::{ConditionResult, SigmaResult, Tri, Witness};
use crate::config::RunConfig;
use crate::ifs::{AffineMap, OpenSetSpec, Point, SpaceDescriptor};
use crate::matrix::SparseOp;
use crate::region::BoxR;
use crate::scalar::rat_to_string;
use crate::suites::SuiteReport;
use crate::verdict::{
    CartanVerdict, Evidence, HypothesisLedger, MasaVerdict, SeedSummary, Verdict,
};
use crate::word::IndexWord;
use serde_json::{json, Value};

pub struct ReportInputs<'a> {
    pub config: &'a RunConfig,
    /// Seeds the run actually used (post-refinement survivors).
    pub seeds: &'a [Point],
    /// "auto" or "explicit".
    pub seed_source: &'a str,
    pub ledger: Option<&'a HypothesisLedger>,
    pub verdict: Option<&'a Verdict>,
    pub suites: &'a [SuiteReport],
}

fn point_json(p: &[crate::scalar::Rat]) -> Value {
    Value::Array(p.iter().map(|c| Value::String(rat_to_string(c))).collect())
}

fn box_json(b: &BoxR) -> Value {
    Value::Array(
        b.iter()
            .map(|(lo, hi)| json!([rat_to_string(lo), rat_to_string(hi)]))
            .collect(),
    )
}

fn word_json(w: &IndexWord) -> Value {
    Value::Array(w.letters().iter().map(|&k| json!(k)).collect())
}

fn space_json(space: &SpaceDescriptor) -> Value {
    match space {
        SpaceDescriptor::Interval { lo, hi } => json!({
            "kind": "interval",
            "lo": rat_to_string(lo),
            "hi": rat_to_string(hi),
        }),
        SpaceDescriptor::Box { bounds } => json!({
            "kind": "box",
            "bounds": box_json(bounds),
        }),
        SpaceDescriptor::CantorTernary => json!({ "kind": "cantor_ternary" }),
        SpaceDescriptor::AttractorGeneric { hull } => json!({
            "kind": "attractor_generic",
            "hull": box_json(hull),
        }),
    }
}

fn map_json(m: &AffineMap) -> Value {
    json!({
        "linear": m.linear.iter()
            .map(|row| row.iter().map(rat_to_string).collect::<Vec<_>>())
            .collect::<Vec<_>>(),
        "offset": m.offset.iter().map(rat_to_string).collect::<Vec<_>>(),
    })
}

fn open_set_json(u: &OpenSetSpec) -> Value {
    json!({ "pieces": u.pieces.iter().map(box_json).collect::<Vec<_>>() })
}

fn config_json(cfg: &RunConfig, seeds: &[Point], seed_source: &str) -> Value {
    json!({
        "system": {
            "space": space_json(&cfg.ifs.space),
            "maps": cfg.ifs.maps.iter().map(map_json).collect::<Vec<_>>(),
            "open_set": cfg.ifs.open_set.as_ref().map(open_set_json),
        },
        "seeds": seeds.iter().map(|p| point_json(p)).collect::<Vec<_>>(),
        "seed_source": seed_source,
        "depth": cfg.depth,
        "suites": cfg.suites,
        "rng_seed": cfg.rng_seed,
        "resolution": cfg.resolution,
        "allow_non_contractive": cfg.allow_non_contractive,
        "output": {
            "path": cfg.output_path.as_ref().map(|p| p.display().to_string()),
            "format": cfg.format.label(),
        },
    })
}

fn tri_json(t: Tri) -> Value {
    match t {
        Tri::True => json!("true"),
        Tri::False => json!("false"),
        Tri::Unknown => json!("unknown"),
    }
}

fn witness_json(w: &Witness) -> Value {
    json!({
        "point": w.point.as_ref().map(|p| point_json(p)),
        "words": w.words.as_ref().map(|(a, b)| json!([word_json(a), word_json(b)])),
    })
}

fn condition_json(r: &ConditionResult) -> Value {
    json!({
        "holds": tri_json(r.holds),
        "method": r.method.label(),
        "resolution": r.resolution,
        "witness": r.witness.as_ref().map(witness_json),
        "notes": r.notes,
    })
}

fn sigma_json(s: &SigmaResult) -> Value {
    json!({
        "consistent": s.consistent,
        "branches": s.branches.len(),
        "overlap_witnesses": s.overlap_witnesses.iter().map(|p| point_json(p)).collect::<Vec<_>>(),
        "notes": s.notes,
    })
}

fn seed_summary_json(s: &SeedSummary) -> Value {
    json!({ "kept": s.kept, "removed": s.removed, "depth": s.depth })
}

fn ledger_json(ledger: &HypothesisLedger) -> Value {
    json!({
        "embeddings": ledger.embeddings.as_ref().map(condition_json),
        "osc": ledger.osc.as_ref().map(condition_json),
        "clopen_images": ledger.clopen_images.as_ref().map(condition_json),
        "sigma": ledger.sigma.as_ref().map(sigma_json),
        "essentially_free": ledger.essentially_free.as_ref().map(condition_json),
        "graph_separation": ledger.graph_separation.as_ref().map(condition_json),
        "seed_refinement": ledger.seed_refinement.as_ref().map(seed_summary_json),
    })
}

fn masa_json(m: MasaVerdict) -> Value {
    match m {
        MasaVerdict::True => json!(true),
        MasaVerdict::False => json!(false),
        MasaVerdict::Inconclusive => json!("inconclusive"),
    }
}

fn cartan_json(c: CartanVerdict) -> Value {
    match c {
        CartanVerdict::True => json!(true),
        CartanVerdict::False => json!(false),
        CartanVerdict::Inconclusive => json!("inconclusive"),
        CartanVerdict::NotApplicable => json!("not-applicable"),
    }
}

fn evidence_json(e: &Evidence) -> Value {
    json!({
        "identity_checks_passed": e.identity_checks_passed,
        "identity_checks_failed": e.identity_checks_failed,
        "off_degree_diagonal_nonzero": e.off_degree_diagonal_nonzero,
        "notes": e.notes,
    })
}

fn verdict_json(v: &Verdict) -> Value {
    json!({
        "masa": masa_json(v.masa),
        "cartan": cartan_json(v.cartan),
        "applied": v.applied,
        "failed_hypotheses": v.failed_hypotheses,
        "evidence": v.evidence.as_ref().map(evidence_json),
        "notes": v.notes,
    })
}

fn counterexample_json(c: &crate::suites::Counterexample) -> Value {
    json!({
        "description": c.description,
        "polynomials": c.polynomials,
        "degrees": c.degrees,
        "column": c.column,
        "row": c.row,
        "left": c.left,
        "right": c.right,
    })
}

fn suite_json(s: &SuiteReport) -> Value {
    json!({
        "suite": s.suite,
        "passed": s.passed(),
        "invariants": s.invariants.iter().map(|i| json!({
            "name": i.name,
            "passed": i.passed,
            "checked": i.checked,
            "counterexample": i.counterexample.as_ref().map(counterexample_json),
            "notes": i.notes,
        })).collect::<Vec<_>>(),
    })
}

/// The full report. The `timing` field is always null: populating it
/// would break byte-identical reruns, which the report guarantees.
pub fn report_json(inputs: &ReportInputs) -> Value {
    json!({
        "config": config_json(inputs.config, inputs.seeds, inputs.seed_source),
        "ledger": inputs.ledger.map(ledger_json),
        "verdict": inputs.verdict.map(verdict_json),
        "suites": inputs.suites.iter().map(suite_json).collect::<Vec<_>>(),
        "timing": Value::Null,
    })
}

pub fn to_json_string(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("valid json tree");
    s.push('\n');
    s
}

/// Sparse operator serialization: one sextuple per entry, numerators and
/// denominators as decimal strings so arbitrary precision survives.
pub fn matrix_entries_json(op: &SparseOp) -> Value {
    json!({
        "size": op.basis.len(),
        "entries": op.entries().map(|(r, c, z)| json!([
            r,
            c,
            z.re.numer().to_string(),
            z.re.denom().to_string(),
            z.im.numer().to_string(),
            z.im.denom().to_string(),
        ])).collect::<Vec<_>>(),
        "valid_cols": op.valid_cols().iter().collect::<Vec<_>>(),
        "valid_rows": op.valid_rows().iter().collect::<Vec<_>>(),
    })
}

/// 0 on success, 3 if any suite invariant failed, 4 under --strict when
/// the verdict is inconclusive. Config and I/O failures exit 2 before a
/// report exists.
pub fn exit_code(suites: &[SuiteReport], verdict: Option<&Verdict>, strict: bool) -> i32 {
    if suites.iter().any(|s| !s.passed()) {
        return 3;
    }
    if strict {
        if let Some(v) = verdict {
            if v.masa == MasaVerdict::Inconclusive {
                return 4;
            }
        }
    }
    0
}

fn fmt_opt_str(v: &Value) -> &str {
    v.as_str().unwrap_or("-")
}

fn render_condition(out: &mut String, name: &str, v: &Value) {
    if v.is_null() {
        out.push_str(&format!("  {name}: (not checked)\n"));
        return;
    }
    out.push_str(&format!(
        "  {name}: {} [{}] {}\n",
        fmt_opt_str(&v["holds"]),
        fmt_opt_str(&v["method"]),
        fmt_opt_str(&v["notes"]),
    ));
}

/// Human-readable rendering of the same JSON tree.
pub fn render_text(v: &Value) -> String {
    let mut out = String::from("ifs-cstar report\n");
    let cfg = &v["config"];
    out.push_str(&format!(
        "configuration: depth {}, resolution {}, rng seed {}, suites {}\n",
        cfg["depth"], cfg["resolution"], cfg["rng_seed"], cfg["suites"]
    ));
    out.push_str(&format!(
        "system: {} with {} map(s)\n",
        fmt_opt_str(&cfg["system"]["space"]["kind"]),
        cfg["system"]["maps"].as_array().map(|a| a.len()).unwrap_or(0)
    ));
    let seeds = cfg["seeds"]
        .as_array()
        .map(|pts| {
            pts.iter()
                .map(|p| {
                    p.as_array()
                        .map(|cs| {
                            cs.iter()
                                .map(|c| c.as_str().unwrap_or("?").to_string())
                                .collect::<Vec<_>>()
                                .join(",")
                        })
                        .unwrap_or_default()
                })
                .collect::<Vec<_>>()
                .join("; ")
        })
        .unwrap_or_default();
    out.push_str(&format!(
        "seeds ({}): {}\n",
        fmt_opt_str(&cfg["seed_source"]),
        seeds
    ));

    let ledger = &v["ledger"];
    if !ledger.is_null() {
        out.push_str("ledger:\n");
        for name in [
            "embeddings",
            "osc",
            "clopen_images",
            "essentially_free",
            "graph_separation",
        ] {
            render_condition(&mut out, name, &ledger[name]);
        }
        let sigma = &ledger["sigma"];
        if !sigma.is_null() {
            out.push_str(&format!(
                "  sigma: consistent={} ({} branches) {}\n",
                sigma["consistent"],
                sigma["branches"],
                fmt_opt_str(&sigma["notes"]),
            ));
        }
        let refine = &ledger["seed_refinement"];
        if !refine.is_null() {
            out.push_str(&format!(
                "  seed refinement: kept {}, removed {}, depth {}\n",
                refine["kept"], refine["removed"], refine["depth"]
            ));
        }
    }

    let verdict = &v["verdict"];
    if verdict.is_null() {
        out.push_str("verdict: (not computed)\n");
    } else {
        out.push_str(&format!(
            "verdict: masa {}, cartan {}\n",
            verdict["masa"], verdict["cartan"]
        ));
        if let Some(applied) = verdict["applied"].as_array() {
            if !applied.is_empty() {
                let cites: Vec<&str> = applied.iter().filter_map(|c| c.as_str()).collect();
                out.push_str(&format!("  applied: {}\n", cites.join(", ")));
            }
        }
        if let Some(failed) = verdict["failed_hypotheses"].as_array() {
            if !failed.is_empty() {
                let names: Vec<&str> = failed.iter().filter_map(|c| c.as_str()).collect();
                out.push_str(&format!("  failed hypotheses: {}\n", names.join(", ")));
            }
        }
        if let Some(notes) = verdict["notes"].as_str() {
            if !notes.is_empty() {
                out.push_str(&format!("  notes: {notes}\n"));
            }
        }
    }

    if let Some(suites) = v["suites"].as_array() {
        out.push_str("suites:\n");
        for s in suites {
            let passed = s["passed"].as_bool().unwrap_or(false);
            out.push_str(&format!(
                "  {}: {}\n",
                fmt_opt_str(&s["suite"]),
                if passed { "PASS" } else { "FAIL" }
            ));
            if let Some(invs) = s["invariants"].as_array() {
                for i in invs {
                    let ok = i["passed"].as_bool().unwrap_or(false);
                    out.push_str(&format!(
                        "    {}: {} ({} checked)",
                        fmt_opt_str(&i["name"]),
                        if ok { "pass" } else { "FAIL" },
                        i["checked"]
                    ));
                    if let Some(notes) = i["notes"].as_str() {
                        if !notes.is_empty() {
                            out.push_str(&format!(" — {notes}"));
                        }
                    }
                    out.push('\n');
                    if !ok {
                        if let Some(desc) = i["counterexample"]["description"].as_str() {
                            out.push_str(&format!("      counterexample: {desc}\n"));
                        }
                    }
                }
            }
        }
    }
    out.push_str("timing: (omitted for determinism)\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::basis::OrbitBasis;
    use crate::chains::ChainFn;
    use crate::config::parse_config_str;
    use crate::matrix::rho_n;
    use crate::scalar::{parse_rat, rat};
    use crate::suites::InvariantResult;
    use crate::verdict::{evaluate_verdict, gather_ledger};
    use std::sync::Arc;

    const CANTOR: &str = r#"{
        "system": {
            "space": {"kind": "cantor_ternary"},
            "maps": [
                {"linear": [["1/3"]], "offset": ["0"]},
                {"linear": [["1/3"]], "offset": ["2/3"]}
            ],
            "open_set": {"pieces": [[["0", "1"]]]}
        },
        "seeds": [["2/3"]],
        "depth": 2
    }"#;

    fn sample_report() -> Value {
        let cfg = parse_config_str(CANTOR).unwrap();
        let mut ledger = gather_ledger(&cfg.ifs, cfg.depth, cfg.resolution).unwrap();
        ledger.seed_refinement = Some(SeedSummary {
            kept: 1,
            removed: 0,
            depth: cfg.depth,
        });
        let verdict = evaluate_verdict(&cfg.ifs, &ledger, None).unwrap();
        let suites = vec![SuiteReport {
            suite: "identities".into(),
            invariants: vec![InvariantResult {
                name: "unit-identity".into(),
                passed: true,
                checked: 4,
                counterexample: None,
                notes: String::new(),
            }],
        }];
        report_json(&ReportInputs {
            config: &cfg,
            seeds: &[vec![rat(2, 3)]],
            seed_source: "explicit",
            ledger: Some(&ledger),
            verdict: Some(&verdict),
            suites: &suites,
        })
    }

    #[test]
    fn report_has_the_five_contract_fields() {
        let rep = sample_report();
        let obj = rep.as_object().unwrap();
        let keys: Vec<&String> = obj.keys().collect();
        assert_eq!(keys, vec!["config", "ledger", "suites", "timing", "verdict"]);
        assert!(rep["timing"].is_null());
        assert_eq!(rep["verdict"]["masa"], Value::Bool(true));
        assert_eq!(rep["verdict"]["cartan"], Value::Bool(true));
        assert_eq!(rep["verdict"]["applied"][0], "Thm 6.1.4");
        assert_eq!(rep["ledger"]["osc"]["holds"], "true");
        assert_eq!(rep["config"]["seeds"][0][0], "2/3");
    }

    #[test]
    fn emission_is_deterministic() {
        let a = to_json_string(&sample_report());
        let b = to_json_string(&sample_report());
        assert_eq!(a, b);
        assert!(a.ends_with('\n'));
    }

    #[test]
    fn rationals_round_trip_bit_for_bit() {
        // Odd numerator over a power of two: already in lowest terms, so
        // the canonical rendering equals the source literal.
        let big = "12345678901234567890123456789/1024";
        // Swap only the seed (maps must stay space-invariant to parse).
        let src = CANTOR.replace("[[\"2/3\"]]", &format!("[[\"{big}\"]]"));
        let cfg = parse_config_str(&src).unwrap();
        let seeds = match &cfg.seeds {
            crate::config::SeedSpec::Explicit(p) => p.clone(),
            _ => unreachable!(),
        };
        let rep = report_json(&ReportInputs {
            config: &cfg,
            seeds: &seeds,
            seed_source: "explicit",
            ledger: None,
            verdict: None,
            suites: &[],
        });
        let echoed = rep["config"]["seeds"][0][0].as_str().unwrap();
        assert_eq!(parse_rat(echoed).unwrap(), parse_rat(big).unwrap());
        assert_eq!(echoed, big);

        // And through a full serialize/deserialize cycle.
        let text = to_json_string(&rep);
        let back: Value = serde_json::from_str(&text).unwrap();
        assert_eq!(back["config"]["seeds"][0][0].as_str().unwrap(), big);
        assert_eq!(
            back["config"]["system"]["maps"][0]["linear"][0][0]
                .as_str()
                .unwrap(),
            "1/3"
        );
    }

    #[test]
    fn matrix_entries_serialize_as_sextuples() {
        let cfg = parse_config_str(CANTOR).unwrap();
        let basis = Arc::new(OrbitBasis::build(cfg.ifs, vec![vec![rat(2, 3)]], 1).unwrap());
        let op = rho_n(&basis, 1, &ChainFn::one(1, 1)).unwrap();
        let v = matrix_entries_json(&op);
        assert_eq!(v["size"], 3);
        assert_eq!(v["entries"][0], serde_json::json!([1, 0, "1", "1", "0", "1"]));
        assert_eq!(v["entries"][1], serde_json::json!([2, 0, "1", "1", "0", "1"]));
    }

    #[test]
    fn exit_codes_follow_the_contract() {
        let pass = SuiteReport {
            suite: "identities".into(),
            invariants: vec![],
        };
        let fail = SuiteReport {
            suite: "graded".into(),
            invariants: vec![InvariantResult {
                name: "x".into(),
                passed: false,
                checked: 1,
                counterexample: None,
                notes: String::new(),
            }],
        };
        let decided = Verdict {
            masa: MasaVerdict::True,
            cartan: CartanVerdict::True,
            applied: vec![],
            failed_hypotheses: vec![],
            evidence: None,
            notes: String::new(),
        };
        let inconclusive = Verdict {
            masa: MasaVerdict::Inconclusive,
            cartan: CartanVerdict::Inconclusive,
            applied: vec![],
            failed_hypotheses: vec!["osc".into()],
            evidence: None,
            notes: String::new(),
        };
        assert_eq!(exit_code(&[pass.clone()], Some(&decided), false), 0);
        assert_eq!(exit_code(&[pass.clone()], Some(&decided), true), 0);
        assert_eq!(exit_code(&[fail.clone()], Some(&decided), false), 3);
        assert_eq!(exit_code(&[pass.clone()], Some(&inconclusive), true), 4);
        assert_eq!(exit_code(&[pass], Some(&inconclusive), false), 0);
        // Invariant failure outranks strict-inconclusive.
        assert_eq!(exit_code(&[fail], Some(&inconclusive), true), 3);
    }

    #[test]
    fn text_rendering_covers_the_same_content() {
        let rep = sample_report();
        let text = render_text(&rep);
        assert!(text.contains("masa true"));
        assert!(text.contains("applied: Thm 6.1.4, Thm 6.2.1"));
        assert!(text.contains("identities: PASS"));
        assert!(text.contains("unit-identity: pass (4 checked)"));
        assert!(text.contains("seed refinement: kept 1"));
        assert!(text.contains("seeds (explicit): 2/3"));
    }
}
