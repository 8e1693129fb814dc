#![no_main]
use kernel_greedy::{ModelSnapshot, NewtonModel, Point};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(snapshot) = ModelSnapshot::from_json(text) else { return };
    if let Ok(model) = NewtonModel::from_snapshot(&snapshot) {
        let dim = model.engine().kernel().dim();
        let x = if dim == 1 { Point::new1(0.25) } else { Point::new2(0.25, -0.5) };
        let _ = model.evaluate(&x);
    }
});
