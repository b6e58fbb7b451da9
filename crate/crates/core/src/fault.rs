//! Write-fault injection for crash-safety tests.

use std::io;
use std::sync::atomic::{AtomicI64, Ordering};

/// Counts guarded write steps and fails the chosen one. Disabled by
/// default, in which case every check passes.
#[derive(Debug)]
pub struct FaultInjector {
    /// Checks left before the failure; negative when disabled.
    remaining: AtomicI64,
}

impl Default for FaultInjector {
    fn default() -> Self {
        FaultInjector {
            remaining: AtomicI64::new(-1),
        }
    }
}

impl FaultInjector {
    /// Lets `n` checks pass, fails the next one, then disables itself.
    pub fn fail_after(&self, n: u64) {
        self.remaining.store(n as i64, Ordering::SeqCst);
    }

    pub fn disable(&self) {
        self.remaining.store(-1, Ordering::SeqCst);
    }

    pub fn is_armed(&self) -> bool {
        self.remaining.load(Ordering::SeqCst) >= 0
    }

    /// Called before each guarded write step.
    pub fn check(&self, step: &str) -> io::Result<()> {
        let before = self
            .remaining
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |r| (r >= 0).then(|| r - 1))
            .unwrap_or(-1);
        if before == 0 {
            return Err(io::Error::new(
                io::ErrorKind::StorageFull,
                format!("injected fault during {step}"),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fails_exactly_once_at_the_chosen_step() {
        let f = FaultInjector::default();
        assert!(f.check("a").is_ok());
        f.fail_after(2);
        assert!(f.check("a").is_ok());
        assert!(f.check("b").is_ok());
        let err = f.check("c").unwrap_err();
        assert_eq!(err.kind(), io::ErrorKind::StorageFull);
        assert!(err.to_string().contains("during c"));
        assert!(!f.is_armed());
        assert!(f.check("d").is_ok());
    }
}
