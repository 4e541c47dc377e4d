//! Uniformly sampled multi-channel recordings with an event log.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub time: f64,
    pub kind: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub name: String,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub dt: f64,
    pub t0: f64,
    channels: Vec<Channel>,
    events: Vec<Event>,
}

impl TimeSeries {
    pub fn new(dt: f64, t0: f64) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid(format!("sample period must be positive, got {dt}")));
        }
        Ok(Self {
            dt,
            t0,
            channels: Vec::new(),
            events: Vec::new(),
        })
    }

    /// Builds a series from named columns of equal length.
    pub fn from_columns(dt: f64, t0: f64, columns: Vec<(String, Vec<f64>)>) -> Result<Self> {
        let mut ts = Self::new(dt, t0)?;
        for (name, data) in columns {
            ts.add_channel(name, data)?;
        }
        Ok(ts)
    }

    pub fn add_channel(&mut self, name: impl Into<String>, data: Vec<f64>) -> Result<()> {
        let name = name.into();
        if let Some(first) = self.channels.first() {
            if first.data.len() != data.len() {
                return Err(invalid(format!(
                    "channel '{name}' has {} samples, expected {}",
                    data.len(),
                    first.data.len()
                )));
            }
        }
        if self.channels.iter().any(|c| c.name == name) {
            return Err(invalid(format!("duplicate channel '{name}'")));
        }
        self.channels.push(Channel { name, data });
        Ok(())
    }

    pub fn push_event(&mut self, time: f64, kind: impl Into<String>) -> Result<()> {
        if let Some(last) = self.events.last() {
            if time < last.time {
                return Err(invalid("events must be time-ordered"));
            }
        }
        self.events.push(Event {
            time,
            kind: kind.into(),
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.channels.first().map_or(0, |c| c.data.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn channel(&self, name: &str) -> Option<&[f64]> {
        self.channels
            .iter()
            .find(|c| c.name == name)
            .map(|c| c.data.as_slice())
    }

    pub fn channel_names(&self) -> impl Iterator<Item = &str> {
        self.channels.iter().map(|c| c.name.as_str())
    }

    pub fn channels(&self) -> &[Channel] {
        &self.channels
    }

    pub fn events(&self) -> &[Event] {
        &self.events
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t0 + i as f64 * self.dt
    }

    pub fn duration(&self) -> f64 {
        self.len().saturating_sub(1) as f64 * self.dt
    }

    /// CSV with a `time` column followed by every channel.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("time");
        for c in &self.channels {
            out.push(',');
            out.push_str(&c.name);
        }
        out.push('\n');
        for i in 0..self.len() {
            let _ = write!(out, "{}", self.time(i));
            for c in &self.channels {
                let _ = write!(out, ",{}", c.data[i]);
            }
            out.push('\n');
        }
        out
    }

    /// Keeps only every `stride`-th sample.
    pub fn decimate(&self, stride: usize) -> TimeSeries {
        let stride = stride.max(1);
        TimeSeries {
            dt: self.dt * stride as f64,
            t0: self.t0,
            channels: self
                .channels
                .iter()
                .map(|c| Channel {
                    name: c.name.clone(),
                    data: c.data.iter().step_by(stride).copied().collect(),
                })
                .collect(),
            events: self.events.clone(),
        }
    }
}

/// Row-wise accumulator used by the simulators.
#[derive(Debug)]
pub(crate) struct Recorder {
    names: Vec<&'static str>,
    columns: Vec<Vec<f64>>,
    events: Vec<Event>,
}

impl Recorder {
    pub fn new(names: &[&'static str], capacity: usize) -> Self {
        Self {
            names: names.to_vec(),
            columns: names.iter().map(|_| Vec::with_capacity(capacity)).collect(),
            events: Vec::new(),
        }
    }

    pub fn push(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.columns.len());
        for (col, &v) in self.columns.iter_mut().zip(row) {
            col.push(v);
        }
    }

    pub fn event(&mut self, time: f64, kind: &str) {
        self.events.push(Event {
            time,
            kind: kind.to_string(),
        });
    }

    pub fn finish(self, dt: f64, t0: f64) -> Result<TimeSeries> {
        let mut ts = TimeSeries::new(dt, t0)?;
        for (name, data) in self.names.into_iter().zip(self.columns) {
            ts.add_channel(name, data)?;
        }
        ts.events = self.events;
        Ok(ts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_channels() {
        let mut ts = TimeSeries::new(0.1, 0.0).unwrap();
        ts.add_channel("a", vec![1.0, 2.0]).unwrap();
        assert!(ts.add_channel("b", vec![1.0]).is_err());
        assert!(ts.add_channel("a", vec![1.0, 2.0]).is_err());
        assert!(TimeSeries::new(0.0, 0.0).is_err());
    }

    #[test]
    fn csv_has_header_and_time_column() {
        let ts = TimeSeries::from_columns(
            0.5,
            1.0,
            vec![("x".into(), vec![1.0, 2.5]), ("y".into(), vec![0.0, -1.0])],
        )
        .unwrap();
        assert_eq!(ts.to_csv(), "time,x,y\n1,1,0\n1.5,2.5,-1\n");
    }

    #[test]
    fn events_stay_ordered() {
        let mut ts = TimeSeries::new(0.1, 0.0).unwrap();
        ts.push_event(1.0, "liftoff").unwrap();
        assert!(ts.push_event(0.5, "touchdown").is_err());
    }
}
