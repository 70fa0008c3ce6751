//! The MDP file format: one JSON document with `num_states`, `num_actions`,
//! `gamma`, `transitions` (`[S][A][S]`) and `rewards` (`[S][A]`).
//!
//! Numbers are written in scientific notation with 17 significant digits,
//! which is lossless for `f64`.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::FiniteMdp;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdpFile {
    pub num_states: usize,
    pub num_actions: usize,
    pub gamma: f64,
    pub transitions: Vec<Vec<Vec<f64>>>,
    pub rewards: Vec<Vec<f64>>,
}

impl From<&FiniteMdp> for MdpFile {
    fn from(mdp: &FiniteMdp) -> Self {
        let (ns, na) = (mdp.num_states(), mdp.num_actions());
        MdpFile {
            num_states: ns,
            num_actions: na,
            gamma: mdp.gamma(),
            transitions: (0..ns)
                .map(|x| (0..na).map(|a| mdp.next_dist(x, a).to_vec()).collect())
                .collect(),
            rewards: (0..ns)
                .map(|x| (0..na).map(|a| mdp.reward(x, a)).collect())
                .collect(),
        }
    }
}

impl TryFrom<MdpFile> for FiniteMdp {
    type Error = Error;

    fn try_from(file: MdpFile) -> Result<Self> {
        let mdp = FiniteMdp::from_nested(&file.transitions, &file.rewards, file.gamma)?;
        if mdp.num_states() != file.num_states || mdp.num_actions() != file.num_actions {
            return Err(Error::DimensionMismatch(format!(
                "header says {}x{}, tables are {}x{}",
                file.num_states,
                file.num_actions,
                mdp.num_states(),
                mdp.num_actions()
            )));
        }
        Ok(mdp)
    }
}

/// Pretty JSON with every float in `{:.16e}` form.
struct SciFormatter<'a> {
    inner: serde_json::ser::PrettyFormatter<'a>,
}

impl serde_json::ser::Formatter for SciFormatter<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }

    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.inner.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(
        &mut self,
        w: &mut W,
        first: bool,
    ) -> std::io::Result<()> {
        self.inner.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> std::io::Result<()> {
        self.inner.end_object_value(w)
    }
}

pub fn write_mdp<W: Write>(mdp: &FiniteMdp, writer: W) -> Result<()> {
    let formatter = SciFormatter {
        inner: serde_json::ser::PrettyFormatter::new(),
    };
    let mut ser = serde_json::Serializer::with_formatter(writer, formatter);
    MdpFile::from(mdp).serialize(&mut ser)?;
    Ok(())
}

pub fn read_mdp<R: Read>(reader: R) -> Result<FiniteMdp> {
    let file: MdpFile = serde_json::from_reader(reader)?;
    file.try_into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{random_mdp, RandomMdpSpec};

    #[test]
    fn round_trip_is_lossless() {
        let mdp = random_mdp(&RandomMdpSpec::default(), 3).unwrap();
        let mut buf = Vec::new();
        write_mdp(&mdp, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.contains("\"num_states\": 5"));
        assert!(text.contains("e-1"));
        assert_eq!(read_mdp(buf.as_slice()).unwrap(), mdp);
    }

    #[test]
    fn header_mismatch_is_rejected() {
        let text = r#"{"num_states": 2, "num_actions": 1, "gamma": 0.5,
                       "transitions": [[[1.0]]], "rewards": [[0.0]]}"#;
        assert!(read_mdp(text.as_bytes()).is_err());
        let bad_row = r#"{"num_states": 1, "num_actions": 1, "gamma": 0.5,
                       "transitions": [[[0.9]]], "rewards": [[0.0]]}"#;
        assert!(matches!(
            read_mdp(bad_row.as_bytes()),
            Err(Error::InvalidMdp(_))
        ));
    }
}
