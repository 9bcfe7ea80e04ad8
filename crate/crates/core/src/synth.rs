//! Deterministic synthetic corpus: formula families with shared context
//! vocabulary, topics, graded judgements and visual ids.
//!
//! Every family has a base expression. Its members are small edits of the
//! base and talk about the family's words. Each family also owns two kinds
//! of decoy: *structural* decoys (edits of the base, but described with
//! another family's words) and *contextual* decoys (unrelated expressions
//! described with the family's words). Members are relevant to the family's
//! topic, decoys are judged marginal, so structure and context each find
//! only part of the answer.

use std::collections::HashMap;
use std::io::Write;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::formula_ir::FormulaRecord;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub formulas: usize,
    pub topics: usize,
    pub members_per_family: usize,
    pub structural_decoys: usize,
    pub contextual_decoys: usize,
    /// Edits applied to the base to obtain a member.
    pub member_edits: usize,
    /// Probability that a member repeats an earlier member's source verbatim.
    pub duplicate_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            formulas: 1000,
            topics: 20,
            members_per_family: 10,
            structural_decoys: 2,
            contextual_decoys: 2,
            member_edits: 2,
            duplicate_rate: 0.03,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Judgement {
    pub topic_id: String,
    pub visual_id: String,
    pub grade: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub records: Vec<FormulaRecord>,
    /// Family index of each record (decoys count under the family that owns them).
    pub families: Vec<usize>,
    pub topics: Vec<FormulaRecord>,
    pub qrels: Vec<Judgement>,
    /// `(formula_id, visual_id)`, one per record.
    pub visual_ids: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Expr {
    label: String,
    kids: Vec<Expr>,
}

impl Expr {
    fn leaf(l: &str) -> Self {
        Expr {
            label: l.to_string(),
            kids: Vec::new(),
        }
    }

    fn size(&self) -> usize {
        1 + self.kids.iter().map(Expr::size).sum::<usize>()
    }

    fn sexpr(&self, out: &mut String) {
        if self.kids.is_empty() {
            out.push_str(&self.label);
            return;
        }
        out.push('(');
        out.push_str(&self.label);
        for k in &self.kids {
            out.push(' ');
            k.sexpr(out);
        }
        out.push(')');
    }

    fn to_sexpr(&self) -> String {
        let mut s = String::new();
        self.sexpr(&mut s);
        s
    }

    fn node_mut(&mut self, mut index: usize) -> &mut Expr {
        if index == 0 {
            return self;
        }
        index -= 1;
        for k in &mut self.kids {
            let s = k.size();
            if index < s {
                return k.node_mut(index);
            }
            index -= s;
        }
        unreachable!("index within size")
    }
}

const OPERANDS: &[&str] = &[
    "a", "b", "c", "d", "e", "f", "g", "h", "k", "m", "n", "p", "q", "r", "s", "t", "u", "v", "w", "x", "y", "z",
    "alpha", "beta", "gamma", "theta", "lambda", "pi", "0", "1", "2", "3", "4", "5", "6", "7", "8", "9",
];
const UNARY: &[&str] = &["sin", "cos", "log", "exp", "sqrt", "neg"];
const BINARY: &[&str] = &["+", "-", "*", "/", "^", "=", "frac", "<"];
const TERNARY: &[&str] = &["+", "*", "sum", "int"];

fn random_expr(rng: &mut ChaCha8Rng, budget: usize) -> Expr {
    if budget <= 1 {
        return Expr::leaf(OPERANDS.choose(rng).expect("non-empty"));
    }
    let arity = match budget {
        2 => 1,
        3 | 4 => rng.random_range(1..=2),
        _ => [1, 2, 2, 2, 3][rng.random_range(0..5)],
    };
    let label = match arity {
        1 => UNARY.choose(rng),
        2 => BINARY.choose(rng),
        _ => TERNARY.choose(rng),
    }
    .expect("non-empty");
    let mut rest = budget - 1;
    let mut kids = Vec::with_capacity(arity);
    for i in 0..arity {
        let left = arity - i - 1;
        let share = if left == 0 {
            rest
        } else {
            rng.random_range(1..=(rest - left).max(1))
        };
        kids.push(random_expr(rng, share));
        rest -= share;
    }
    Expr {
        label: label.to_string(),
        kids,
    }
}

fn edit(e: &mut Expr, rng: &mut ChaCha8Rng) {
    let n = e.size();
    let target = e.node_mut(rng.random_range(0..n));
    match rng.random_range(0..3) {
        0 if target.kids.is_empty() => {
            target.label = OPERANDS.choose(rng).expect("non-empty").to_string();
        }
        0 | 1 => {
            let small = rng.random_range(1..=3);
            *target = random_expr(rng, small);
        }
        _ => {
            let inner = std::mem::replace(target, Expr::leaf("x"));
            let op = *UNARY.choose(rng).expect("non-empty");
            *target = Expr {
                label: op.to_string(),
                kids: vec![inner],
            };
        }
    }
}

fn make_word(rng: &mut ChaCha8Rng) -> String {
    const ONSETS: &[&str] = &["b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "br", "st", "tr"];
    const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ou"];
    let syllables = rng.random_range(2..=3);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).expect("non-empty"));
        w.push_str(VOWELS.choose(rng).expect("non-empty"));
    }
    w
}

struct Words {
    family: Vec<Vec<String>>,
    common: Vec<String>,
}

fn context(rng: &mut ChaCha8Rng, own: &[String], common: &[String]) -> String {
    let mut words: Vec<&str> = Vec::new();
    for _ in 0..8 {
        words.push(own.choose(rng).expect("non-empty"));
    }
    for _ in 0..6 {
        words.push(common.choose(rng).expect("non-empty"));
    }
    // Interleave deterministically so the text does not read as two blocks.
    let mut out = Vec::with_capacity(words.len());
    while !words.is_empty() {
        let i = rng.random_range(0..words.len());
        out.push(words.swap_remove(i));
    }
    out.join(" ")
}

impl SynthCorpus {
    pub fn generate(cfg: &SynthConfig) -> SynthCorpus {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let per_family = (cfg.members_per_family + cfg.structural_decoys + cfg.contextual_decoys).max(1);
        let n_families = cfg.formulas.div_ceil(per_family).max(cfg.topics.min(1));
        let words = Words {
            family: (0..n_families)
                .map(|_| (0..5).map(|_| make_word(&mut rng)).collect())
                .collect(),
            common: (0..60).map(|_| make_word(&mut rng)).collect(),
        };
        let bases: Vec<Expr> = (0..n_families)
            .map(|_| {
                let size = rng.random_range(7..=15);
                random_expr(&mut rng, size)
            })
            .collect();

        let mut records = Vec::with_capacity(cfg.formulas);
        let mut families = Vec::with_capacity(cfg.formulas);
        // (family, role) per record: 0 member, 1 structural decoy, 2 contextual decoy.
        let mut roles = Vec::with_capacity(cfg.formulas);
        'outer: for (f, base) in bases.iter().enumerate() {
            let mut members: Vec<String> = Vec::new();
            for j in 0..per_family {
                if records.len() == cfg.formulas {
                    break 'outer;
                }
                let role = if j < cfg.members_per_family {
                    0
                } else if j < cfg.members_per_family + cfg.structural_decoys {
                    1
                } else {
                    2
                };
                let source = match role {
                    0 if !members.is_empty() && rng.random_bool(cfg.duplicate_rate) => {
                        members.choose(&mut rng).expect("non-empty").clone()
                    }
                    0 | 1 => {
                        let mut e = base.clone();
                        for _ in 0..cfg.member_edits {
                            edit(&mut e, &mut rng);
                        }
                        e.to_sexpr()
                    }
                    _ => {
                        let size = rng.random_range(7..=15);
                        random_expr(&mut rng, size).to_sexpr()
                    }
                };
                if role == 0 {
                    members.push(source.clone());
                }
                let own = if role == 1 {
                    // Another family's words.
                    let other = (f + 1 + rng.random_range(0..n_families.max(2) - 1)) % n_families;
                    &words.family[other]
                } else {
                    &words.family[f]
                };
                let idx = records.len();
                records.push(FormulaRecord {
                    formula_id: format!("f{idx:05}"),
                    post_id: format!("p{:05}", idx / 2),
                    source_text: source,
                    context: context(&mut rng, own, &words.common),
                });
                families.push(f);
                roles.push(role);
            }
        }

        let mut visual_of_source: HashMap<&str, String> = HashMap::new();
        let mut visual_ids = Vec::with_capacity(records.len());
        for r in &records {
            let next = format!("v{:05}", visual_of_source.len());
            let v = visual_of_source.entry(r.source_text.as_str()).or_insert(next).clone();
            visual_ids.push((r.formula_id.clone(), v));
        }

        let mut topics = Vec::with_capacity(cfg.topics);
        let mut qrels = Vec::new();
        for t in 0..cfg.topics {
            let f = t % n_families;
            let mut q = bases[f].clone();
            edit(&mut q, &mut rng);
            let topic_id = format!("T{:03}", t + 1);
            topics.push(FormulaRecord {
                formula_id: topic_id.clone(),
                post_id: format!("q{:03}", t + 1),
                source_text: q.to_sexpr(),
                context: context(&mut rng, &words.family[f], &words.common),
            });
            let mut seen: HashMap<&str, u8> = HashMap::new();
            for (i, (_, vis)) in visual_ids.iter().enumerate() {
                if families[i] != f {
                    continue;
                }
                let grade = match roles[i] {
                    0 => 2 + u8::from(i % 2 == 0),
                    _ => 1,
                };
                let g = seen.entry(vis.as_str()).or_insert(0);
                *g = (*g).max(grade);
            }
            // A handful of judged non-relevant formulas from other families.
            for _ in 0..5 {
                let i = rng.random_range(0..records.len());
                if families[i] != f {
                    seen.entry(visual_ids[i].1.as_str()).or_insert(0);
                }
            }
            let mut judged: Vec<(&str, u8)> = seen.into_iter().collect();
            judged.sort();
            for (v, g) in judged {
                qrels.push(Judgement {
                    topic_id: topic_id.clone(),
                    visual_id: v.to_string(),
                    grade: g,
                });
            }
        }

        SynthCorpus {
            records,
            families,
            topics,
            qrels,
            visual_ids,
        }
    }

    pub fn write_qrels<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for j in &self.qrels {
            writeln!(w, "{}\t{}\t0\t{}", j.topic_id, j.visual_id, j.grade)?;
        }
        Ok(())
    }

    pub fn write_visual_map<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (f, v) in &self.visual_ids {
            writeln!(w, "{f}\t{v}")?;
        }
        Ok(())
    }
}
