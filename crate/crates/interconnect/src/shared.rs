//! Thread-safe handle for hosts that share one interconnect.

use std::sync::{Arc, Mutex, MutexGuard};

use interconnect_core::Interconnect;

#[derive(Clone)]
pub struct SharedInterconnect(Arc<Mutex<Interconnect>>);

impl SharedInterconnect {
    pub fn new(ic: Interconnect) -> Self {
        SharedInterconnect(Arc::new(Mutex::new(ic)))
    }

    /// Locks the interconnect; a poisoned lock is recovered since every
    /// operation leaves the journal consistent before returning.
    pub fn lock(&self) -> MutexGuard<'_, Interconnect> {
        self.0.lock().unwrap_or_else(|e| e.into_inner())
    }

    pub fn with<R>(&self, f: impl FnOnce(&mut Interconnect) -> R) -> R {
        f(&mut self.lock())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use interconnect_core::fabric::{MessageKind, Outgoing};
    use interconnect_core::guard::{Guard, HitlPolicy};
    use interconnect_core::registry::Registry;
    use std::thread;

    #[test]
    fn concurrent_publishers_get_distinct_ids() {
        let shared = SharedInterconnect::new(Interconnect::new(Registry::new(3), Guard::new(HitlPolicy::Off)));
        shared.with(|ic| {
            ic.fabric.ensure_shared("load/x");
            for t in 0..4 {
                ic.register_node(&format!("t{t}"));
            }
        });
        let handles: Vec<_> = (0..4)
            .map(|t| {
                let h = shared.clone();
                thread::spawn(move || {
                    (0..25)
                        .map(|i| {
                            h.with(|ic| {
                                let msg = Outgoing::new("load/x", MessageKind::Data, "s", &format!("t{t}")).payload(format!("{i}"));
                                ic.publish(msg).unwrap().id
                            })
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        let mut ids: Vec<_> = handles.into_iter().flat_map(|h| h.join().unwrap()).collect();
        ids.sort();
        ids.dedup();
        assert_eq!(ids.len(), 100);
    }
}
