//! The bundled MiniLang corpus, seeded argument vectors, and the
//! planted-bias dataset generator.

use minilang::{parse, pretty, Program, Value};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

include!(concat!(env!("OUT_DIR"), "/corpus_files.rs"));

/// `(name, source)` for every bundled `.mini` file, sorted by name.
pub fn bundled() -> &'static [(&'static str, &'static str)] {
    BUNDLED
}

pub fn bundled_programs() -> Vec<(&'static str, Program)> {
    BUNDLED
        .iter()
        .map(|(n, s)| (*n, parse(s).expect("bundled corpus parses")))
        .collect()
}

/// `count` argument vectors of length `arity`. Integers are drawn from
/// `-10..=25`; a fraction `bool_rate` of the values are booleans.
pub fn arg_vectors(arity: usize, seed: u64, count: usize, bool_rate: f64) -> Vec<Vec<Value>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            (0..arity)
                .map(|_| {
                    if rng.random_bool(bool_rate) {
                        Value::Bool(rng.random_bool(0.5))
                    } else {
                        Value::Int(rng.random_range(-10..=25))
                    }
                })
                .collect()
        })
        .collect()
}

/// One generated program with its ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub name: String,
    pub program: Program,
    /// Hidden-rule class index: 0 clean, 1 defective.
    pub label: usize,
    /// Whether some identifier is short enough to trigger the planted bias.
    pub biased: bool,
}

const LONG: [&str; 12] = [
    "count", "total", "limit", "value", "index", "result", "step", "accum", "width", "height", "delta", "bound",
];
const SHORT: [&str; 12] = ["a", "b", "c", "i", "j", "k", "n", "m", "x", "y", "t", "s"];
const HELPERS: [&str; 4] = ["scale", "adjust", "shift", "widen"];
const SHORT_HELPERS: [&str; 4] = ["f", "g", "h", "fx"];

fn pick<'a>(rng: &mut ChaCha8Rng, pool: &[&'a str], n: usize) -> Vec<&'a str> {
    let idx = rand::seq::index::sample(rng, pool.len(), n);
    idx.into_iter().map(|i| pool[i]).collect()
}

/// Builds one program from the loop template. `names` supplies two params,
/// two locals and an inner counter.
fn template(rng: &mut ChaCha8Rng, names: &[&str], helper: Option<&str>, division: bool, nested: bool) -> String {
    let (p0, p1, acc, cur, inner) = (names[0], names[1], names[2], names[3], names[4]);
    let k = rng.random_range(2..6);
    let mut s = String::new();
    if let Some(h) = helper {
        s.push_str(&format!(
            "fn {h}(amount) {{ return amount * {} + 1; }}\n",
            rng.random_range(2..4)
        ));
    }
    s.push_str(&format!("fn main({p0}, {p1}) {{\n"));
    s.push_str(&format!("let {cur} = {k};\n"));
    s.push_str(&format!("if ({p0} > {cur}) {{ {cur} = {cur} + 2; }}\n"));
    s.push_str(&format!("let {acc} = 0;\n"));
    s.push_str(&format!("while ({cur} > 0) {{\n"));
    if nested {
        s.push_str(&format!("let {inner} = 0;\n"));
        s.push_str(&format!("while ({inner} < 3) {{\n"));
        s.push_str(&format!("{acc} = {acc} + {inner};\n{inner} = {inner} + 1;\n}}\n"));
    }
    let step = if division {
        if rng.random_bool(0.5) {
            format!("{cur} / {k}")
        } else {
            format!("{cur} * {cur} - {cur} / 2")
        }
    } else {
        format!("{cur} * {k}")
    };
    s.push_str(&format!("{acc} = {acc} + {step};\n"));
    s.push_str(&format!("{cur} = {cur} - 1;\n}}\n"));
    let ret = match helper {
        Some(h) => format!("{h}({acc})"),
        None => acc.to_string(),
    };
    if rng.random_bool(0.5) {
        s.push_str(&format!(
            "if ({acc} > {p1}) {{ return {ret}; }} else {{ return {p1}; }}\n"
        ));
    } else {
        s.push_str(&format!("if ({p1} < 0) {{ return 0 - {p1}; }}\nreturn {ret};\n"));
    }
    s.push_str("}\n");
    s
}

/// Generates `n` programs; odd indices carry the planted bias. About one in
/// five biased programs gets its bias from a short helper function name
/// rather than short variable names.
pub fn planted_bias(n: usize, seed: u64) -> Vec<Labeled> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let biased = i % 2 == 1;
            let defective = (i / 2) % 2 == 1;
            let (division, nested) = if defective {
                match rng.random_range(0..3) {
                    0 => (true, false),
                    1 => (false, true),
                    _ => (true, true),
                }
            } else {
                (false, false)
            };
            let helper_bias = biased && rng.random_bool(0.2);
            let names = if biased && !helper_bias {
                pick(&mut rng, &SHORT, 5)
            } else {
                pick(&mut rng, &LONG, 5)
            };
            let helper = if helper_bias {
                Some(SHORT_HELPERS[rng.random_range(0..SHORT_HELPERS.len())])
            } else if rng.random_bool(0.3) {
                Some(HELPERS[rng.random_range(0..HELPERS.len())])
            } else {
                None
            };
            let src = template(&mut rng, &names, helper, division, nested);
            let program = parse(&src).expect("generated program parses");
            Labeled {
                name: format!("planted_{i:03}"),
                program,
                label: usize::from(defective),
                biased,
            }
        })
        .collect()
}

/// Canonical source text of a generated dataset entry.
pub fn source(l: &Labeled) -> String {
    pretty(&l.program)
}

#[cfg(test)]
mod tests {
    use super::*;
    use minilang::{interpret, DEFAULT_FUEL};

    #[test]
    fn bundled_corpus_is_embedded() {
        assert!(bundled().len() >= 50);
        assert_eq!(bundled_programs().len(), bundled().len());
    }

    #[test]
    fn arg_vectors_are_seeded() {
        assert_eq!(arg_vectors(3, 9, 5, 0.1), arg_vectors(3, 9, 5, 0.1));
        assert_ne!(arg_vectors(3, 9, 5, 0.1), arg_vectors(3, 10, 5, 0.1));
        assert!(arg_vectors(2, 1, 50, 0.0)
            .iter()
            .flatten()
            .all(|v| matches!(v, Value::Int(-10..=25))));
    }

    #[test]
    fn planted_corpus_shape() {
        let data = planted_bias(200, 42);
        assert_eq!(data.len(), 200);
        assert_eq!(data.iter().filter(|d| d.biased).count(), 100);
        assert_eq!(data.iter().filter(|d| d.label == 1).count(), 100);
        for d in &data {
            let shortest = d.program.identifiers().iter().map(|s| s.len()).min().unwrap();
            assert_eq!(shortest <= 2, d.biased, "{}", d.name);
            for args in arg_vectors(2, 3, 5, 0.0) {
                let out = interpret(&d.program, "main", &args, DEFAULT_FUEL);
                assert!(matches!(out, minilang::Outcome::Ok(_)), "{}: {out}", d.name);
            }
        }
        assert_eq!(planted_bias(20, 1), planted_bias(20, 1));
    }
}
