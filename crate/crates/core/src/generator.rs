//! Synthetic corpus: small tables with repeated values, and questions built
//! from templates whose gold programs run over the nine operators.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::{Corpus, Dataset, DatasetError, Example, Split, Tables};
use crate::executor::{execute, Answer};
use crate::grammar::ActionSpace;
use crate::mr::{parse_program, quote, Program};
use crate::table::{Cell, Column, ColumnKind, TableEnv};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub seed: u64,
    pub n_train: usize,
    pub n_dev: usize,
    pub n_test: usize,
    pub min_cols: usize,
    pub max_cols: usize,
    pub min_rows: usize,
    pub max_rows: usize,
    pub hard_fraction: f64,
    /// Questions asked about each generated table.
    pub examples_per_table: usize,
    /// Dev and test draw fresh tables instead of reusing train tables.
    pub unseen_tables: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            seed: 7,
            n_train: 2000,
            n_dev: 400,
            n_test: 400,
            min_cols: 3,
            max_cols: 6,
            min_rows: 4,
            max_rows: 12,
            hard_fraction: 0.5,
            examples_per_table: 2,
            unseen_tables: true,
        }
    }
}

impl GenConfig {
    pub fn cold_start_stress() -> Self {
        GenConfig { hard_fraction: 0.8, ..GenConfig::default() }
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::InvalidConfig(m.to_string()));
        if self.n_train == 0 || self.n_dev == 0 || self.n_test == 0 {
            return bad("split sizes must be at least 1");
        }
        if !(0.0..=1.0).contains(&self.hard_fraction) {
            return bad("hard_fraction must lie in [0, 1]");
        }
        if self.min_cols < 3 || self.min_cols > self.max_cols || self.max_cols > 6 {
            return bad("columns must satisfy 3 <= min_cols <= max_cols <= 6");
        }
        if self.min_rows < 4 || self.min_rows > self.max_rows || self.max_rows > 12 {
            return bad("rows must satisfy 4 <= min_rows <= max_rows <= 12");
        }
        if self.examples_per_table == 0 {
            return bad("examples_per_table must be at least 1");
        }
        Ok(())
    }
}

enum Pool {
    Text(&'static [&'static str]),
    Int(i64, i64),
}

struct ColSpec {
    name: &'static str,
    pool: Pool,
    /// Time-like column; enables "after"/"before" phrasings.
    temporal: bool,
}

struct Domain {
    noun: &'static str,
    key: ColSpec,
    others: &'static [ColSpec],
}

const fn text(name: &'static str, pool: &'static [&'static str]) -> ColSpec {
    ColSpec { name, pool: Pool::Text(pool), temporal: false }
}

const fn int(name: &'static str, lo: i64, hi: i64) -> ColSpec {
    ColSpec { name, pool: Pool::Int(lo, hi), temporal: false }
}

const fn year(name: &'static str, lo: i64, hi: i64) -> ColSpec {
    ColSpec { name, pool: Pool::Int(lo, hi), temporal: true }
}

const NATIONS: &[&str] = &[
    "Norway", "China", "Chile", "Peru", "Kenya", "Japan", "Italy", "Spain", "Brazil", "Canada", "Egypt",
    "India", "Mexico", "Ghana", "Poland", "Sweden",
];
const CITIES: &[&str] = &[
    "Oslo", "Lima", "Cairo", "Rome", "Madrid", "Tokyo", "Nairobi", "Accra", "Quito", "Dublin", "Vienna",
    "Prague", "Lisbon", "Athens", "Bern", "Riga",
];
const DRIVERS: &[&str] = &[
    "Alonso", "Button", "Massa", "Kubica", "Webber", "Rosberg", "Trulli", "Glock", "Sutil", "Piquet",
    "Heidfeld", "Barrichello", "Fisichella", "Nakajima", "Bourdais", "Vettel",
];
const FILMS: &[&str] = &[
    "Aurora", "Blue Harbor", "Cold Creek", "Dust", "Echo Park", "Firefly", "Glass Road", "Hollow",
    "Iron Bay", "Juniper", "Kingfisher", "Low Tide", "Marigold", "North Star", "Orchard", "Paper Moon",
];
const PLAYERS: &[&str] = &[
    "Silva", "Moreno", "Keane", "Novak", "Haas", "Berg", "Costa", "Ferro", "Lund", "Mertens", "Okoro",
    "Petrov", "Quinn", "Rossi", "Sato", "Varga",
];
const VENUES: &[&str] = &[
    "Oslo", "Lima", "Cairo", "Rome", "Madrid", "Tokyo", "Nairobi", "Accra", "Quito", "Dublin", "Vienna",
    "Prague", "Lisbon", "Athens",
];

const DOMAINS: &[Domain] = &[
    Domain {
        noun: "nations",
        key: text("Nation", NATIONS),
        others: &[
            int("Gold", 0, 6),
            int("Silver", 0, 6),
            int("Bronze", 0, 6),
            int("Rank", 1, 9),
            text("Region", &["Europe", "Asia", "Africa", "America"]),
        ],
    },
    Domain {
        noun: "venues",
        key: text("Venue", VENUES),
        others: &[
            year("Year", 2001, 2012),
            text("Competition", &["World Cup", "Grand Prix", "Masters", "Open", "Asian Games"]),
            int("Position", 1, 8),
            text("Event", &["Sprint", "Relay", "Marathon", "Hurdles"]),
            int("Points", 10, 30),
        ],
    },
    Domain {
        noun: "drivers",
        key: text("Driver", DRIVERS),
        others: &[
            text("Team", &["Ferrari", "Lotus", "Williams", "McLaren", "Renault"]),
            int("Laps", 52, 60),
            int("Grid", 1, 12),
            int("Points", 0, 10),
            text("Tyres", &["Soft", "Medium", "Hard"]),
        ],
    },
    Domain {
        noun: "films",
        key: text("Film", FILMS),
        others: &[
            text("Director", &["Lang", "Reed", "Wong", "Haneke", "Varda", "Ozu"]),
            year("Year", 1990, 2004),
            int("Awards", 0, 5),
            text("Studio", &["Apex", "Lumen", "Meridian", "Northlight"]),
            int("Runtime", 88, 99),
        ],
    },
    Domain {
        noun: "cities",
        key: text("City", CITIES),
        others: &[
            text("Country", &["Norway", "Peru", "Egypt", "Italy", "Spain", "Japan"]),
            int("Population", 90000, 130000),
            int("Area", 20, 60),
            year("Founded", 1820, 1840),
            text("Climate", &["Arid", "Temperate", "Tropical", "Alpine"]),
        ],
    },
    Domain {
        noun: "players",
        key: text("Player", PLAYERS),
        others: &[
            text("Club", &["Rovers", "United", "Athletic", "Wanderers", "City"]),
            int("Goals", 0, 12),
            int("Games", 20, 30),
            text("Role", &["Forward", "Midfielder", "Defender", "Goalkeeper"]),
            int("Assists", 0, 9),
        ],
    },
];

const DISTRACTORS_PRE: &[&str] = &["please tell me ,", "in this table ,", "according to the list ,", "quick question :"];
const DISTRACTORS_POST: &[&str] = &["in the table", "according to the chart", "if you know", "from the data shown", "listed here"];

/// Template families. Easy ones compile to one statement.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Template {
    CountAll,
    MaxAll,
    MinAll,
    HopAll,
    EqCount,
    EqHop,
    ArgmaxHop,
    ArgminHop,
    GreaterHop,
    LessHop,
    EqGreaterHop,
    EqEqHop,
    GreaterCount,
    EqMax,
}

impl Template {
    pub const EASY: [Template; 4] = [Template::CountAll, Template::MaxAll, Template::MinAll, Template::HopAll];
    pub const HARD: [Template; 10] = [
        Template::EqCount,
        Template::EqHop,
        Template::ArgmaxHop,
        Template::ArgminHop,
        Template::GreaterHop,
        Template::LessHop,
        Template::EqGreaterHop,
        Template::EqEqHop,
        Template::GreaterCount,
        Template::EqMax,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Template::CountAll => "count_all",
            Template::MaxAll => "max_all",
            Template::MinAll => "min_all",
            Template::HopAll => "hop_all",
            Template::EqCount => "eq_count",
            Template::EqHop => "eq_hop",
            Template::ArgmaxHop => "argmax_hop",
            Template::ArgminHop => "argmin_hop",
            Template::GreaterHop => "greater_hop",
            Template::LessHop => "less_hop",
            Template::EqGreaterHop => "eq_greater_hop",
            Template::EqEqHop => "eq_eq_hop",
            Template::GreaterCount => "greater_count",
            Template::EqMax => "eq_max",
        }
    }
}

struct Built {
    env: TableEnv,
    specs: Vec<&'static ColSpec>,
    domain: &'static Domain,
}

fn build_table(rng: &mut ChaCha8Rng, cfg: &GenConfig, id: String) -> Built {
    let domain = DOMAINS.choose(rng).expect("domains");
    let n_cols = rng.random_range(cfg.min_cols..=cfg.max_cols);
    let n_rows = rng.random_range(cfg.min_rows..=cfg.max_rows);
    let mut others: Vec<&ColSpec> = domain.others.iter().collect();
    others.shuffle(rng);
    others.truncate(n_cols - 1);
    // Keep the schema order stable so the same domain prints alike.
    others.sort_by_key(|s| domain.others.iter().position(|o| std::ptr::eq(o, *s)));
    if !others.iter().any(|s| matches!(s.pool, Pool::Int(..))) {
        let first_num = domain.others.iter().find(|s| matches!(s.pool, Pool::Int(..))).expect("numeric column");
        others[0] = first_num;
    }
    let mut specs = vec![&domain.key];
    specs.extend(others);

    let Pool::Text(keys) = domain.key.pool else { unreachable!("text key") };
    let mut keys: Vec<&str> = keys.to_vec();
    keys.shuffle(rng);
    let rows: Vec<Vec<Cell>> = (0..n_rows)
        .map(|r| {
            specs
                .iter()
                .enumerate()
                .map(|(c, s)| match (&s.pool, c) {
                    (_, 0) => Cell::text(keys[r]),
                    (Pool::Text(p), _) => Cell::text(*p.choose(rng).expect("pool")),
                    (Pool::Int(lo, hi), _) => Cell::int(rng.random_range(*lo..=*hi)),
                })
                .collect()
        })
        .collect();
    let columns = specs
        .iter()
        .map(|s| Column {
            name: s.name.to_string(),
            kind: match s.pool {
                Pool::Text(_) => ColumnKind::Text,
                Pool::Int(..) => ColumnKind::Number,
            },
        })
        .collect();
    let env = TableEnv::new(id, columns, rows).expect("generated table is well formed");
    Built { env, specs, domain }
}

fn say_cell(rng: &mut ChaCha8Rng, c: &Cell) -> String {
    match c {
        Cell::Number(n) => {
            let v = n.as_i64().expect("integer cells");
            if v >= 10000 && rng.random_bool(0.5) {
                format!("{},{:03}", v / 1000, v % 1000)
            } else {
                v.to_string()
            }
        }
        Cell::Text(t) => t.to_lowercase(),
    }
}

struct Ctx<'a> {
    b: &'a Built,
}

impl Ctx<'_> {
    fn cols(&self, kind: ColumnKind) -> Vec<usize> {
        (1..self.b.specs.len()).filter(|&c| self.b.env.columns()[c].kind == kind).collect()
    }

    fn nonkey(&self) -> Vec<usize> {
        (1..self.b.specs.len()).collect()
    }

    fn name(&self, c: usize) -> String {
        self.b.env.columns()[c].name.to_lowercase()
    }

    fn col(&self, c: usize) -> String {
        quote(&self.b.env.columns()[c].name)
    }

    fn lit(&self, cell: &Cell) -> String {
        quote(&cell.to_string())
    }

    fn values(&self, c: usize) -> Vec<Cell> {
        let mut v: Vec<Cell> = self.b.env.distinct_values(c).into_iter().cloned().collect();
        v.sort();
        v
    }
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> Option<&'a T> {
    xs.choose(rng)
}

fn fill(pattern: &str, slots: &[(&str, &str)]) -> String {
    let mut s = pattern.to_string();
    for (k, v) in slots {
        s = s.replace(&format!("{{{k}}}"), v);
    }
    s
}

/// Returns (utterance, gold program text) or `None` when the table cannot
/// host the template.
fn instantiate(rng: &mut ChaCha8Rng, t: Template, b: &Built) -> Option<(String, String)> {
    let cx = Ctx { b };
    let noun = b.domain.noun;
    let k = cx.name(0);
    let kc = cx.col(0);
    let nums = cx.cols(ColumnKind::Number);
    let out = match t {
        Template::CountAll => {
            let p = pick(rng, &[
                "how many {noun} are there",
                "what is the number of {noun}",
                "count the {noun} listed",
                "how many {noun} appear",
                "total count of {noun}",
            ])?;
            (fill(p, &[("noun", noun)]), "(count all_rows)".to_string())
        }
        Template::MaxAll | Template::MinAll => {
            let c = *pick(rng, &nums)?;
            let pats: &[&str] = if t == Template::MaxAll {
                &["what is the highest {c}", "what was the largest {c}", "maximum {c} of any {k}", "the greatest {c} value", "top {c} figure"]
            } else {
                &["what is the lowest {c}", "what was the smallest {c}", "minimum {c} of any {k}", "the least {c} value", "bottom {c} figure"]
            };
            let f = if t == Template::MaxAll { "maximum" } else { "minimum" };
            let p = pick(rng, pats)?;
            (fill(p, &[("c", &cx.name(c)), ("k", &k)]), format!("({f} all_rows {})", cx.col(c)))
        }
        Template::HopAll => {
            let c = *pick(rng, &cx.cols(ColumnKind::Text))?;
            let p = pick(rng, &[
                "list every {c}",
                "what are all the {c} entries",
                "name each {c} in the table",
                "show all {c} values",
                "give the full {c} column",
            ])?;
            (fill(p, &[("c", &cx.name(c))]), format!("(hop all_rows {})", cx.col(c)))
        }
        Template::EqCount | Template::EqHop | Template::EqMax => {
            let c = *pick(rng, &cx.nonkey())?;
            let v = pick(rng, &cx.values(c))?.clone();
            let vs = say_cell(rng, &v);
            let filter = format!("(filter_eq all_rows {} {})", cx.lit(&v), cx.col(c));
            match t {
                Template::EqCount => {
                    let p = pick(rng, &[
                        "how many {noun} have {v} as {c}",
                        "how many {noun} had {c} {v}",
                        "number of {noun} with {c} {v}",
                        "count the {noun} whose {c} is {v}",
                    ])?;
                    (fill(p, &[("noun", noun), ("c", &cx.name(c)), ("v", &vs)]), format!("{filter} (count v0)"))
                }
                Template::EqHop => {
                    let p = pick(rng, &[
                        "which {k} had {v} as {c}",
                        "what {k} has {c} {v}",
                        "name the {k} with {c} {v}",
                        "the {k} whose {c} is {v}",
                    ])?;
                    (fill(p, &[("k", &k), ("c", &cx.name(c)), ("v", &vs)]), format!("{filter} (hop v0 {kc})"))
                }
                _ => {
                    let m = *pick(rng, &nums.iter().copied().filter(|&m| m != c).collect::<Vec<_>>())?;
                    let p = pick(rng, &[
                        "what is the highest {m} among {noun} with {c} {v}",
                        "largest {m} for {c} {v}",
                        "maximum {m} where {c} is {v}",
                        "with {c} {v} , what is the top {m}",
                    ])?;
                    (
                        fill(p, &[("noun", noun), ("c", &cx.name(c)), ("v", &vs), ("m", &cx.name(m))]),
                        format!("{filter} (maximum v0 {})", cx.col(m)),
                    )
                }
            }
        }
        Template::ArgmaxHop | Template::ArgminHop => {
            let c = *pick(rng, &nums)?;
            let (f, pats): (&str, &[&str]) = if t == Template::ArgmaxHop {
                ("argmax", &["which {k} has the most {c}", "what {k} had the highest {c}", "name the {k} with the largest {c}", "who had the top {c}"])
            } else {
                ("argmin", &["which {k} has the fewest {c}", "what {k} had the lowest {c}", "name the {k} with the smallest {c}", "who had the least {c}"])
            };
            let p = pick(rng, pats)?;
            (fill(p, &[("k", &k), ("c", &cx.name(c))]), format!("({f} all_rows {}) (hop v0 {kc})", cx.col(c)))
        }
        Template::GreaterHop | Template::LessHop | Template::GreaterCount => {
            let c = *pick(rng, &nums)?;
            let vals = cx.values(c);
            let greater = t != Template::LessHop;
            let n = if greater { pick(rng, &vals[..vals.len() - 1])? } else { pick(rng, &vals[1..])? }.clone();
            let ns = say_cell(rng, &n);
            let f = if greater { "filter_greater" } else { "filter_less" };
            let filter = format!("({f} all_rows {} {})", cx.lit(&n), cx.col(c));
            let temporal = b.specs[c].temporal;
            let pats: &[&str] = match (t, temporal) {
                (Template::GreaterCount, _) => &[
                    "how many {noun} had more than {n} {c}",
                    "number of {noun} with {c} above {n}",
                    "count the {noun} with {c} over {n}",
                    "how many {noun} have {c} greater than {n}",
                ],
                (_, true) if greater => &["which {k} came after {n}", "what {k} is later than {n}", "name the {k} with {c} after {n}", "which {k} had {c} later than {n}"],
                (_, true) => &["which {k} came before {n}", "what {k} is earlier than {n}", "name the {k} with {c} before {n}", "which {k} had {c} earlier than {n}"],
                _ if greater => &["which {k} had more than {n} {c}", "what {k} has {c} above {n}", "name the {k} with {c} greater than {n}", "which {k} had {c} over {n}"],
                _ => &["which {k} had fewer than {n} {c}", "what {k} has {c} below {n}", "name the {k} with {c} less than {n}", "which {k} had {c} under {n}"],
            };
            let p = pick(rng, pats)?;
            let tail = if t == Template::GreaterCount { "(count v0)".to_string() } else { format!("(hop v0 {kc})") };
            (fill(p, &[("noun", noun), ("k", &k), ("c", &cx.name(c)), ("n", &ns)]), format!("{filter} {tail}"))
        }
        Template::EqGreaterHop => {
            let c = *pick(rng, &cx.cols(ColumnKind::Text))?;
            let v = pick(rng, &cx.values(c))?.clone();
            let m = *pick(rng, &nums)?;
            let rows: Vec<usize> =
                (0..b.env.n_rows()).filter(|&r| b.env.cell(r, c) == &v).collect();
            let mut inner: Vec<Cell> = rows.iter().map(|&r| b.env.cell(r, m).clone()).collect();
            inner.sort();
            inner.dedup();
            if inner.len() < 2 {
                return None;
            }
            let n = pick(rng, &inner[..inner.len() - 1])?.clone();
            let (vs, ns) = (say_cell(rng, &v), say_cell(rng, &n));
            let p = pick(rng, &[
                "which {k} with {c} {v} had more than {n} {m}",
                "among {noun} with {c} {v} , which {k} has {m} above {n}",
                "what {k} had {m} over {n} and {c} {v}",
                "name the {k} with {c} {v} and {m} greater than {n}",
            ])?;
            (
                fill(p, &[("noun", noun), ("k", &k), ("c", &cx.name(c)), ("v", &vs), ("m", &cx.name(m)), ("n", &ns)]),
                format!(
                    "(filter_eq all_rows {} {}) (filter_greater v0 {} {}) (hop v1 {kc})",
                    cx.lit(&v),
                    cx.col(c),
                    cx.lit(&n),
                    cx.col(m)
                ),
            )
        }
        Template::EqEqHop => {
            let texts = cx.nonkey();
            let c1 = *pick(rng, &texts)?;
            let c2 = *pick(rng, &texts.iter().copied().filter(|&c| c != c1).collect::<Vec<_>>())?;
            let r = rng.random_range(0..b.env.n_rows());
            let (v1, v2) = (b.env.cell(r, c1).clone(), b.env.cell(r, c2).clone());
            let (v1s, v2s) = (say_cell(rng, &v1), say_cell(rng, &v2));
            let p = pick(rng, &[
                "which {k} had {c1} {v1} and {c2} {v2}",
                "what {k} has {v1} as {c1} and {v2} as {c2}",
                "name the {k} with {c1} {v1} and {c2} {v2}",
                "the {k} whose {c1} is {v1} and {c2} is {v2}",
            ])?;
            (
                fill(p, &[("k", &k), ("c1", &cx.name(c1)), ("v1", &v1s), ("c2", &cx.name(c2)), ("v2", &v2s)]),
                format!(
                    "(filter_eq all_rows {} {}) (filter_eq v0 {} {}) (hop v1 {kc})",
                    cx.lit(&v1),
                    cx.col(c1),
                    cx.lit(&v2),
                    cx.col(c2)
                ),
            )
        }
    };
    Some(out)
}

fn decorate(rng: &mut ChaCha8Rng, body: String) -> String {
    let mut s = body;
    if rng.random_bool(0.25) {
        s = format!("{} {s}", DISTRACTORS_PRE.choose(rng).expect("pool"));
    }
    if rng.random_bool(0.3) {
        s = format!("{s} {}", DISTRACTORS_POST.choose(rng).expect("pool"));
    }
    format!("{s} ?")
}

/// One example from `b`, or `None` when no template fits after a few tries.
fn make_example(rng: &mut ChaCha8Rng, cfg: &GenConfig, b: &Built, id: String) -> Option<Example> {
    for _ in 0..20 {
        let hard = rng.random_bool(cfg.hard_fraction);
        let t = if hard { *Template::HARD.choose(rng)? } else { *Template::EASY.choose(rng)? };
        let Some((utt, prog)) = instantiate(rng, t, b) else { continue };
        let program: Program = parse_program(&prog).expect("template programs parse");
        let Ok(value) = execute(&program, &b.env) else { continue };
        let Some(answer) = Answer::from_value(&value) else { continue };
        if matches!(&answer, Answer::Multiset(cs) if cs.len() > 4) && t != Template::HopAll {
            continue;
        }
        let mut ex = Example::new(id.clone(), decorate(rng, utt), b.env.id(), answer, Some(program));
        let space = ActionSpace::new(&b.env, &ex.utterance, ex.gold_mr.as_ref()?.len());
        if space.actions_of(ex.gold_mr.as_ref()?).is_none() {
            continue;
        }
        ex.template = Some(t.name().to_string());
        return Some(ex);
    }
    None
}

fn gen_split(
    rng: &mut ChaCha8Rng,
    cfg: &GenConfig,
    split: Split,
    n: usize,
    tables: &mut Tables,
    pool: &mut Vec<Arc<Built>>,
    reuse: bool,
) -> Vec<Example> {
    let mut out = Vec::with_capacity(n);
    let mut current: Option<Arc<Built>> = None;
    let mut used = 0;
    while out.len() < n {
        if current.is_none() || used >= cfg.examples_per_table {
            let b = if reuse && !pool.is_empty() {
                pool.choose(rng).expect("nonempty").clone()
            } else {
                let id = format!("{split}-t{:05}", tables.len());
                let b = Arc::new(build_table(rng, cfg, id.clone()));
                tables.insert(id, Arc::new(b.env.clone()));
                pool.push(b.clone());
                b
            };
            current = Some(b);
            used = 0;
        }
        let b = current.clone().expect("table");
        used += 1;
        let id = format!("{split}-{:05}", out.len());
        if let Some(ex) = make_example(rng, cfg, &b, id) {
            out.push(ex);
        }
    }
    out
}

pub fn generate_corpus(cfg: &GenConfig) -> Result<Corpus, DatasetError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut tables = BTreeMap::new();
    let mut pool = Vec::new();
    let train = gen_split(&mut rng, cfg, Split::Train, cfg.n_train, &mut tables, &mut pool, false);
    let reuse = !cfg.unseen_tables;
    let dev = gen_split(&mut rng, cfg, Split::Dev, cfg.n_dev, &mut tables, &mut pool, reuse);
    let test = gen_split(&mut rng, cfg, Split::Test, cfg.n_test, &mut tables, &mut pool, reuse);
    let tables = Arc::new(tables);
    let mk = |split, examples| Dataset { split, examples, tables: tables.clone() };
    Ok(Corpus { train: mk(Split::Train, train), dev: mk(Split::Dev, dev), test: mk(Split::Test, test) })
}

/// Count of examples per template name.
pub fn template_mix(d: &Dataset) -> BTreeMap<String, usize> {
    let mut m = BTreeMap::new();
    for ex in &d.examples {
        *m.entry(ex.template.clone().unwrap_or_else(|| "unknown".into())).or_insert(0) += 1;
    }
    m
}
