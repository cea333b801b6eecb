//! Opt-in trace output on stderr, selected by `EHATP_LOG=sa|expand|all`.

use std::sync::OnceLock;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topic {
    Sa,
    Expand,
}

fn setting() -> &'static (bool, bool) {
    static SETTING: OnceLock<(bool, bool)> = OnceLock::new();
    SETTING.get_or_init(|| {
        let v = std::env::var("EHATP_LOG").unwrap_or_default();
        let all = v.split(',').any(|s| s.trim() == "all");
        let has = |t: &str| all || v.split(',').any(|s| s.trim() == t);
        (has("sa"), has("expand"))
    })
}

pub fn enabled(topic: Topic) -> bool {
    let (sa, expand) = *setting();
    match topic {
        Topic::Sa => sa,
        Topic::Expand => expand,
    }
}

macro_rules! trace {
    ($topic:expr, $($arg:tt)*) => {
        if $crate::trace::enabled($topic) {
            eprintln!($($arg)*);
        }
    };
}
pub(crate) use trace;
