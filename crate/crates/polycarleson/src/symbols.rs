//! Named symbols runnable by name from the command line and the battery.

use polycarleson_core::symbols::catalog;
use polycarleson_core::symbols::{PolySymbol, Polynomial};
use polycarleson_core::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};

#[derive(Clone, Copy, Debug)]
pub struct NamedSymbol {
    pub name: &'static str,
    pub description: &'static str,
    build: fn() -> PolySymbol,
}

impl NamedSymbol {
    pub fn symbol(&self) -> PolySymbol {
        (self.build)()
    }
}

fn scalar(f: Polynomial) -> PolySymbol {
    catalog::scalar(&f)
}

const NAMED: &[NamedSymbol] = &[
    NamedSymbol {
        name: "identity2",
        description: "(z1, z2)",
        build: || catalog::identity(2),
    },
    NamedSymbol {
        name: "identity3",
        description: "(z1, z2, z3)",
        build: || catalog::identity(3),
    },
    NamedSymbol {
        name: "product1",
        description: "scalar z",
        build: || scalar(catalog::product(1)),
    },
    NamedSymbol {
        name: "product2",
        description: "scalar z1 z2",
        build: || scalar(catalog::product(2)),
    },
    NamedSymbol {
        name: "product3",
        description: "scalar z1 z2 z3",
        build: || scalar(catalog::product(3)),
    },
    NamedSymbol {
        name: "powersum2",
        description: "scalar (z1² + z2²)/2",
        build: || scalar(catalog::power_sum(2)),
    },
    NamedSymbol {
        name: "powersum3",
        description: "scalar (z1³ + z2³ + z3³)/3",
        build: || scalar(catalog::power_sum(3)),
    },
    NamedSymbol {
        name: "mean2",
        description: "scalar (z1 + z2)/2",
        build: || scalar(catalog::mean(2)),
    },
    NamedSymbol {
        name: "mean3",
        description: "scalar (z1 + z2 + z3)/3",
        build: || scalar(catalog::mean(3)),
    },
    NamedSymbol {
        name: "diagonal-pair",
        description: "((z1 + z2)/2, z1 z2)",
        build: catalog::diagonal_pair,
    },
    NamedSymbol {
        name: "square-second",
        description: "(z1, z2²)",
        build: catalog::square_second,
    },
    NamedSymbol {
        name: "damped-pair",
        description: "(z1 z2, z1 z2 / 2)",
        build: catalog::damped_product_pair,
    },
    NamedSymbol {
        name: "swap",
        description: "(z2, z1)",
        build: catalog::swap,
    },
    NamedSymbol {
        name: "rotation",
        description: "(e^{0.9i} z1, z2)",
        build: || catalog::rotation(0.9),
    },
    NamedSymbol {
        name: "half-first",
        description: "(z1/2, z2)",
        build: catalog::half_first,
    },
    NamedSymbol {
        name: "rank-one-triple",
        description: "(z1 z2, z1 z2, 0)",
        build: catalog::rank_one_triple,
    },
    NamedSymbol {
        name: "repeated-product3",
        description: "(f, f, 0) with f = z1 z2 z3",
        build: || catalog::repeated(&catalog::product(3)),
    },
    NamedSymbol {
        name: "repeated-product4",
        description: "(f, f, f, 0) with f = z1 z2 z3 z4",
        build: || catalog::repeated(&catalog::product(4)),
    },
];

pub fn named() -> &'static [NamedSymbol] {
    NAMED
}

pub fn lookup(name: &str) -> Option<&'static NamedSymbol> {
    NAMED.iter().find(|s| s.name == name)
}

/// A symbol given by name or as the literal row format
/// `[[[re, im, α_1, …, α_n], …], …]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SymbolSpec {
    Named(String),
    Literal(Vec<Vec<Vec<f64>>>),
}

impl SymbolSpec {
    /// Parses a command-line value: JSON when it starts with `[`, a name
    /// otherwise.
    pub fn parse(s: &str) -> AppResult<Self> {
        let t = s.trim();
        if t.starts_with('[') {
            Ok(SymbolSpec::Literal(
                serde_json::from_str(t).map_err(|e| AppError::Config(format!("symbol literal: {e}")))?,
            ))
        } else {
            Ok(SymbolSpec::Named(t.to_string()))
        }
    }

    pub fn build(&self) -> AppResult<PolySymbol> {
        match self {
            SymbolSpec::Named(n) => lookup(n).map(|s| s.symbol()).ok_or_else(|| {
                let names: Vec<&str> = NAMED.iter().map(|s| s.name).collect();
                AppError::Config(format!("unknown symbol {n:?}; known: {}", names.join(", ")))
            }),
            SymbolSpec::Literal(rows) => {
                PolySymbol::from_rows(rows).map_err(|e| AppError::Config(format!("symbol literal: {e}")))
            }
        }
    }

    pub fn label(&self) -> String {
        match self {
            SymbolSpec::Named(n) => n.clone(),
            SymbolSpec::Literal(_) => "literal".into(),
        }
    }
}

pub fn unit(angle: f64) -> Complex64 {
    Complex64::cis(angle)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_named_symbol_builds() {
        for s in named() {
            let phi = s.symbol();
            assert!(phi.n_in() >= 1, "{}", s.name);
            let spec = SymbolSpec::Named(s.name.into());
            assert_eq!(spec.build().unwrap(), phi);
        }
    }

    #[test]
    fn literal_round_trip() {
        let spec = SymbolSpec::parse("[[[0.5,0,1,0],[0.5,0,0,1]],[[1,0,1,1]]]").unwrap();
        let phi = spec.build().unwrap();
        assert_eq!(phi, polycarleson_core::symbols::catalog::diagonal_pair());
        assert!(SymbolSpec::parse("nope").unwrap().build().is_err());
        assert!(SymbolSpec::parse("[[[2,0,1]]]").unwrap().build().is_err());
    }
}
