#![no_main]

use libfuzzer_sys::fuzz_target;
use qchannel_cli::config;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(cfg) = config::parse(text) else { return };
    if cfg.diagnostics().is_empty() {
        // Everything run() derives before doing work must succeed on a valid config.
        cfg.pipeline().unwrap();
        if let Some(ch) = &cfg.channel {
            ch.idle().unwrap();
        }
        cfg.edge_rotation().to_rotation().unwrap();
        for r in cfg.face_rotations() {
            r.to_rotation().unwrap();
        }
    }
});
