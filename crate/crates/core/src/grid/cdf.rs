//! IEEE Common Data Format reader.
//!
//! Only the BUS DATA and BRANCH DATA sections are read. Everything after the
//! branch section (loss zones, interchange, tie lines) is ignored. Branches
//! keep only their reactance `x`, which becomes the DC susceptance `1/x`.

use super::{GridError, PowerGrid};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CdfError {
    #[error("line {line}: expected a `{expected}` section header, found {found:?}")]
    MalformedHeader {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("{section} section is not terminated by a -999 sentinel")]
    Unterminated { section: &'static str },
    #[error("line {line}: invalid {field} field {text:?}")]
    InvalidField {
        line: usize,
        field: &'static str,
        text: String,
    },
    #[error("line {line}: non-numeric branch reactance {text:?}")]
    NonNumericReactance { line: usize, text: String },
    #[error("line {line}: zero branch reactance gives infinite susceptance")]
    ZeroReactance { line: usize },
    #[error("line {line}: bus {bus} appears twice in BUS DATA")]
    DuplicateBus { line: usize, bus: u32 },
    #[error("line {line}: branch references unknown bus {bus}")]
    UnknownBus { line: usize, bus: u32 },
    #[error("invalid grid: {0}")]
    Grid(#[from] GridError),
}

/// Bus type code from columns 25-26.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BusKind {
    Load,
    Generator,
    Slack,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CdfBus {
    pub id: u32,
    pub name: String,
    pub kind: BusKind,
    pub load_mw: f64,
    pub generation_mw: f64,
}

/// A parsed case: the DC grid plus the per-bus metadata of the file.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfCase {
    pub title: String,
    /// Bus records in re-indexed order (ascending original id).
    pub buses: Vec<CdfBus>,
    pub branch_records: usize,
    pub grid: PowerGrid,
}

/// 1-based inclusive column range, tolerant of short lines.
fn columns(line: &str, first: usize, last: usize) -> &str {
    let bytes = line.as_bytes();
    let start = (first - 1).min(bytes.len());
    let end = last.min(bytes.len());
    line.get(start..end).unwrap_or("").trim()
}

fn number<T: std::str::FromStr>(
    line: &str,
    lineno: usize,
    (first, last): (usize, usize),
    field: &'static str,
) -> Result<T, CdfError> {
    let text = columns(line, first, last);
    text.parse().map_err(|_| CdfError::InvalidField {
        line: lineno,
        field,
        text: text.to_string(),
    })
}

fn is_sentinel(line: &str) -> bool {
    line.trim_start().starts_with("-999")
}

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    /// Next non-blank line with its 1-based number.
    fn next_nonblank(&mut self) -> Option<(usize, &'a str)> {
        self.inner
            .by_ref()
            .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
            .find(|(_, l)| !l.trim().is_empty())
    }

    fn expect_header(&mut self, expected: &'static str) -> Result<(), CdfError> {
        match self.next_nonblank() {
            Some((_, l)) if l.trim_start().starts_with(expected) => Ok(()),
            Some((line, l)) => Err(CdfError::MalformedHeader {
                line,
                expected,
                found: l.trim().to_string(),
            }),
            None => Err(CdfError::MalformedHeader {
                line: 0,
                expected,
                found: "end of file".into(),
            }),
        }
    }
}

impl CdfCase {
    pub fn parse(text: &str) -> Result<Self, CdfError> {
        let mut lines = Lines {
            inner: text.lines().enumerate(),
        };
        let title = match lines.next_nonblank() {
            Some((_, l)) if l.trim_start().starts_with("BUS DATA FOLLOWS") => {
                return Err(CdfError::MalformedHeader {
                    line: 1,
                    expected: "title card",
                    found: l.trim().to_string(),
                })
            }
            Some((_, l)) => l.trim().to_string(),
            None => {
                return Err(CdfError::MalformedHeader {
                    line: 0,
                    expected: "title card",
                    found: "end of file".into(),
                })
            }
        };

        lines.expect_header("BUS DATA FOLLOWS")?;
        let mut raw_buses = Vec::new();
        loop {
            let (lineno, line) = lines.next_nonblank().ok_or(CdfError::Unterminated {
                section: "BUS DATA",
            })?;
            if is_sentinel(line) {
                break;
            }
            let id: u32 = number(line, lineno, (1, 4), "bus number")?;
            let kind = match number::<i32>(line, lineno, (25, 26), "bus type")? {
                2 => BusKind::Generator,
                3 => BusKind::Slack,
                _ => BusKind::Load,
            };
            raw_buses.push((
                lineno,
                CdfBus {
                    id,
                    name: columns(line, 6, 17).to_string(),
                    kind,
                    load_mw: number(line, lineno, (41, 49), "load MW")?,
                    generation_mw: number(line, lineno, (60, 67), "generation MW")?,
                },
            ));
        }

        let mut index: BTreeMap<u32, usize> = BTreeMap::new();
        for (lineno, bus) in &raw_buses {
            if index.insert(bus.id, 0).is_some() {
                return Err(CdfError::DuplicateBus {
                    line: *lineno,
                    bus: bus.id,
                });
            }
        }
        // Contiguous re-indexing by ascending original id.
        for (k, slot) in index.values_mut().enumerate() {
            *slot = k;
        }
        let mut buses: Vec<CdfBus> = raw_buses.into_iter().map(|(_, b)| b).collect();
        buses.sort_by_key(|b| b.id);

        lines.expect_header("BRANCH DATA FOLLOWS")?;
        let mut branches = Vec::new();
        loop {
            let (lineno, line) = lines.next_nonblank().ok_or(CdfError::Unterminated {
                section: "BRANCH DATA",
            })?;
            if is_sentinel(line) {
                break;
            }
            let lookup = |bus: u32| {
                index
                    .get(&bus)
                    .copied()
                    .ok_or(CdfError::UnknownBus { line: lineno, bus })
            };
            let from = lookup(number(line, lineno, (1, 4), "tap bus number")?)?;
            let to = lookup(number(line, lineno, (6, 9), "Z bus number")?)?;
            let text = columns(line, 30, 40);
            let x: f64 = text
                .parse()
                .ok()
                .filter(|x: &f64| x.is_finite())
                .ok_or_else(|| CdfError::NonNumericReactance {
                    line: lineno,
                    text: text.to_string(),
                })?;
            if x == 0.0 {
                return Err(CdfError::ZeroReactance { line: lineno });
            }
            branches.push((from, to, 1.0 / x));
        }

        let branch_records = branches.len();
        let grid = PowerGrid::new(buses.len(), branches, None)?;
        Ok(CdfCase {
            title,
            buses,
            branch_records,
            grid,
        })
    }

    pub fn generator_count(&self) -> usize {
        self.buses
            .iter()
            .filter(|b| b.kind != BusKind::Load)
            .count()
    }

    pub fn load_count(&self) -> usize {
        self.buses.iter().filter(|b| b.load_mw > 0.0).count()
    }
}

/// Parse an IEEE CDF case into its DC grid.
pub fn parse_cdf(text: &str) -> Result<PowerGrid, CdfError> {
    CdfCase::parse(text).map(|c| c.grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TITLE: &str = " 01/01/00 TEST                  100.0  2000 W Two bus";

    fn bus(id: u32, kind: u8) -> String {
        format!(
            "{id:4} {:<12} {:2}{:3} {kind:2} {:6.3}{:7.2}{:9.1}{:10.1}{:8.1}{:8.1}",
            format!("Bus {id}"),
            1,
            1,
            1.0,
            0.0,
            10.0,
            0.0,
            0.0,
            0.0
        )
    }

    fn branch(i: u32, j: u32, x: &str) -> String {
        format!("{i:4} {j:4} {:2}{:3} 1 0{:10.5}{x:>11}{:10.5}", 1, 1, 0.0, 0.0)
    }

    fn case(buses: &[String], branches: &[String]) -> String {
        let mut out = vec![TITLE.to_string(), "BUS DATA FOLLOWS     2 ITEMS".into()];
        out.extend_from_slice(buses);
        out.push("-999".into());
        out.push("BRANCH DATA FOLLOWS     1 ITEMS".into());
        out.extend_from_slice(branches);
        out.push("-999".into());
        out.push("END OF DATA".into());
        out.join("\n")
    }

    #[test]
    fn two_bus_susceptance_is_inverse_reactance() {
        let text = case(&[bus(1, 2), bus(2, 3)], &[branch(1, 2, "0.50000")]);
        let grid = parse_cdf(&text).unwrap();
        assert_eq!(grid.num_buses(), 2);
        assert_eq!(grid.lines().len(), 1);
        assert_eq!(grid.lines()[0].susceptance, 2.0);
        assert_eq!(grid.reference(), 1);
    }

    #[test]
    fn bus_ids_are_reindexed_contiguously() {
        let text = case(
            &[bus(40, 0), bus(7, 2), bus(12, 0)],
            &[branch(7, 40, "0.25000"), branch(40, 12, "1.00000")],
        );
        let case = CdfCase::parse(&text).unwrap();
        let ids: Vec<u32> = case.buses.iter().map(|b| b.id).collect();
        assert_eq!(ids, vec![7, 12, 40]);
        // highest original id becomes the reference
        assert_eq!(case.grid.reference(), 2);
        let l = case.grid.lines();
        assert_eq!((l[0].from, l[0].to, l[0].susceptance), (0, 2, 4.0));
        assert_eq!((l[1].from, l[1].to, l[1].susceptance), (1, 2, 1.0));
    }

    #[test]
    fn each_failure_has_its_own_error() {
        let bad_header = case(&[bus(1, 0), bus(2, 0)], &[branch(1, 2, "0.5")])
            .replace("BRANCH DATA FOLLOWS", "BRANCH STUFF");
        assert!(matches!(
            CdfCase::parse(&bad_header),
            Err(CdfError::MalformedHeader {
                expected: "BRANCH DATA FOLLOWS",
                ..
            })
        ));

        let text = case(&[bus(1, 0), bus(2, 0)], &[branch(1, 2, "abc")]);
        assert!(matches!(
            parse_cdf(&text),
            Err(CdfError::NonNumericReactance { line: 7, .. })
        ));

        let text = case(&[bus(1, 0), bus(2, 0)], &[branch(1, 2, "0.00000")]);
        assert_eq!(parse_cdf(&text), Err(CdfError::ZeroReactance { line: 7 }));

        let text = case(&[bus(1, 0), bus(2, 0), bus(3, 0)], &[branch(1, 2, "0.5")]);
        assert_eq!(
            parse_cdf(&text),
            Err(CdfError::Grid(GridError::Disconnected { unreachable: 1 }))
        );

        let text = case(&[bus(1, 0), bus(2, 0)], &[branch(1, 9, "0.5")]);
        assert!(matches!(
            parse_cdf(&text),
            Err(CdfError::UnknownBus { bus: 9, .. })
        ));

        let text = case(&[bus(1, 0), bus(1, 0)], &[branch(1, 2, "0.5")]);
        assert!(matches!(
            parse_cdf(&text),
            Err(CdfError::DuplicateBus { bus: 1, .. })
        ));

        let truncated = format!("{TITLE}\nBUS DATA FOLLOWS\n{}\n", bus(1, 0));
        assert_eq!(
            parse_cdf(&truncated),
            Err(CdfError::Unterminated {
                section: "BUS DATA"
            })
        );
    }
}
