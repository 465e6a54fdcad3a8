use std::io::{BufRead, Write};
use std::sync::{Arc, Mutex, MutexGuard};

use super::{Actuate, LinkError, PhysicalLink, SensorFrame, WireMessage};

/// Newline-delimited JSON over any reader/writer pair (serial port, TCP
/// stream, child process pipes). `poll` blocks until a line arrives.
pub struct StreamLink<R, W> {
    reader: R,
    writer: W,
    line: String,
}

impl<R: BufRead, W: Write> StreamLink<R, W> {
    pub fn new(reader: R, writer: W) -> Self {
        StreamLink {
            reader,
            writer,
            line: String::new(),
        }
    }

    pub fn into_inner(self) -> (R, W) {
        (self.reader, self.writer)
    }
}

impl<R: BufRead + Send, W: Write + Send> PhysicalLink for StreamLink<R, W> {
    fn push(&mut self, msg: &Actuate) -> Result<(), LinkError> {
        let line = serde_json::to_string(&WireMessage::Actuate(msg.clone()))
            .map_err(|e| LinkError::Protocol(e.to_string()))?;
        writeln!(self.writer, "{line}")?;
        self.writer.flush()?;
        Ok(())
    }

    fn poll(&mut self) -> Result<Option<SensorFrame>, LinkError> {
        loop {
            self.line.clear();
            if self.reader.read_line(&mut self.line)? == 0 {
                return Err(LinkError::Closed);
            }
            if self.line.trim().is_empty() {
                continue;
            }
            return match serde_json::from_str(self.line.trim()) {
                Ok(WireMessage::Frame(f)) => Ok(Some(f)),
                Ok(WireMessage::Actuate(_)) => Err(LinkError::Protocol("expected a frame, got actuate".into())),
                Err(e) => Err(LinkError::Protocol(e.to_string())),
            };
        }
    }
}

#[derive(Debug, Default)]
struct Mailbox {
    latest: Actuate,
    version: u64,
    inbox: Option<SensorFrame>,
}

/// Link whose other end is polled and fed by someone else, such as an
/// HTTP handler. Pushed states accumulate into one latest message; the
/// newest submitted frame replaces any unread one.
#[derive(Debug, Clone, Default)]
pub struct SharedLink {
    inner: Arc<Mutex<Mailbox>>,
}

impl SharedLink {
    pub fn new() -> Self {
        Self::default()
    }

    fn lock(&self) -> MutexGuard<'_, Mailbox> {
        self.inner.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn submit_frame(&self, frame: SensorFrame) {
        self.lock().inbox = Some(frame);
    }

    /// All states pushed so far, with a counter bumped on every push.
    pub fn latest_actuate(&self) -> (u64, Actuate) {
        let m = self.lock();
        (m.version, m.latest.clone())
    }
}

impl PhysicalLink for SharedLink {
    fn push(&mut self, msg: &Actuate) -> Result<(), LinkError> {
        let mut m = self.lock();
        m.latest.states.extend(msg.states.iter().map(|(k, v)| (k.clone(), *v)));
        m.latest.params.extend(msg.params.iter().map(|(k, v)| (k.clone(), *v)));
        m.version += 1;
        Ok(())
    }

    fn poll(&mut self) -> Result<Option<SensorFrame>, LinkError> {
        Ok(self.lock().inbox.take())
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;
    use std::io::Cursor;

    use super::*;

    fn actuate(pairs: &[(&str, bool)]) -> Actuate {
        Actuate {
            states: pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            params: BTreeMap::new(),
        }
    }

    #[test]
    fn stream_round_trip() {
        let input = "\n{\"type\":\"frame\",\"readings\":{\"S1\":0.9}}\n";
        let mut link = StreamLink::new(Cursor::new(input), Vec::new());
        link.push(&actuate(&[("E2", true)])).unwrap();
        let frame = link.poll().unwrap().unwrap();
        assert_eq!(frame.readings["S1"], 0.9);
        assert!(matches!(link.poll(), Err(LinkError::Closed)));
        let (_, out) = link.into_inner();
        assert_eq!(String::from_utf8(out).unwrap(), "{\"type\":\"actuate\",\"states\":{\"E2\":true},\"params\":{}}\n");
    }

    #[test]
    fn stream_rejects_garbage() {
        let mut link = StreamLink::new(Cursor::new("not json\n"), Vec::new());
        assert!(matches!(link.poll(), Err(LinkError::Protocol(_))));
        let mut link = StreamLink::new(Cursor::new("{\"type\":\"actuate\",\"states\":{}}\n"), Vec::new());
        assert!(matches!(link.poll(), Err(LinkError::Protocol(_))));
    }

    #[test]
    fn shared_link_accumulates() {
        let mut link = SharedLink::new();
        let other = link.clone();
        link.push(&actuate(&[("E1", true), ("E2", true)])).unwrap();
        link.push(&actuate(&[("E2", false)])).unwrap();
        let (version, latest) = other.latest_actuate();
        assert_eq!(version, 2);
        assert_eq!(latest.states, BTreeMap::from([("E1".into(), true), ("E2".into(), false)]));

        assert_eq!(link.poll().unwrap(), None);
        other.submit_frame(SensorFrame { ts: 1, ..Default::default() });
        other.submit_frame(SensorFrame { ts: 2, ..Default::default() });
        assert_eq!(link.poll().unwrap().unwrap().ts, 2);
        assert_eq!(link.poll().unwrap(), None);
    }
}
