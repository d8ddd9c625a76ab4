//! Device roster files.
//!
//! One device per line, whitespace separated:
//!
//! ```text
//! # id class owner batch home work x y [interests]
//! 0 manager alice b1 h1 w1 10.0 20.0 music,chess
//! 1 subordinate bob b1 - - 55 5
//! ```
//!
//! `-` marks a missing value. Interests are comma separated.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use crate::error::{Error, Result};
use crate::social::{Device, DeviceClass, DeviceId, Position};

#[derive(Debug, Clone, PartialEq)]
pub struct RosterEntry {
    pub device: Device,
}

fn optional(field: &str) -> Option<String> {
    (field != "-").then(|| field.to_string())
}

pub fn parse_roster(reader: impl Read, source: &Path) -> Result<Vec<RosterEntry>> {
    let mut out = Vec::new();
    let mut seen = BTreeSet::new();
    for (k, line) in BufReader::new(reader).lines().enumerate() {
        let line = line.map_err(|e| Error::io(source, e))?;
        let body = line.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let err = |message: String| Error::Parse {
            path: source.to_path_buf(),
            line: k + 1,
            message,
        };
        let f: Vec<&str> = body.split_whitespace().collect();
        if !(8..=9).contains(&f.len()) {
            return Err(err(format!("expected 8 or 9 fields, found {}", f.len())));
        }
        let id: u32 = f[0]
            .parse()
            .map_err(|_| err(format!("invalid device id `{}`", f[0])))?;
        if !seen.insert(id) {
            return Err(err(format!("duplicate device id {id}")));
        }
        let class: DeviceClass = f[1].parse().map_err(|e: Error| err(e.to_string()))?;
        let x: f64 = f[6]
            .parse()
            .map_err(|_| err(format!("invalid coordinate `{}`", f[6])))?;
        let y: f64 = f[7]
            .parse()
            .map_err(|_| err(format!("invalid coordinate `{}`", f[7])))?;
        let mut device = Device::new(DeviceId(id), class);
        device.owner = f[2].to_string();
        device.manufacturer_batch = f[3].to_string();
        device.home_place = optional(f[4]);
        device.work_group = optional(f[5]);
        device.position = Position::new(x, y);
        if let Some(list) = f.get(8).and_then(|s| optional(s)) {
            device.profile.interests = list
                .split(',')
                .filter(|s| !s.is_empty())
                .map(String::from)
                .collect();
        }
        out.push(RosterEntry { device });
    }
    Ok(out)
}

pub fn load_roster(path: &Path) -> Result<Vec<RosterEntry>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_roster(file, path)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_entries() {
        let text = "# roster\n0 manager alice b1 h1 w1 10 20 music,chess\n1 subordinate bob b2 - - 5.5 0\n";
        let r = parse_roster(text.as_bytes(), Path::new("r.txt")).unwrap();
        assert_eq!(r.len(), 2);
        let d0 = &r[0].device;
        assert!(d0.is_manager());
        assert_eq!(d0.home_place.as_deref(), Some("h1"));
        assert_eq!(d0.profile.interests.len(), 2);
        let d1 = &r[1].device;
        assert_eq!(d1.work_group, None);
        assert_eq!(d1.position, Position::new(5.5, 0.0));
    }

    #[test]
    fn rejects_bad_lines() {
        let bad = [
            "0 manager a b - - 1\n",
            "0 boss a b - - 1 2\n",
            "0 manager a b - - 1 2\n0 manager a b - - 1 2\n",
            "x manager a b - - 1 2\n",
        ];
        for text in bad {
            assert!(
                matches!(
                    parse_roster(text.as_bytes(), Path::new("r")),
                    Err(Error::Parse { .. })
                ),
                "{text}"
            );
        }
    }
}
