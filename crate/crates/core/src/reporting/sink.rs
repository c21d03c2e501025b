use std::cell::RefCell;
use std::fmt;
use std::io::{self, Write};
use std::sync::{Arc, Mutex};

/// The stream reporters write to. Dynamically scoped per thread; the
/// runner re-installs the port that was current when a run began on every
/// thread that emits events for that run.
#[derive(Clone)]
pub struct OutputPort(Arc<Mutex<Box<dyn Write + Send>>>);

impl OutputPort {
    pub fn new(writer: impl Write + Send + 'static) -> Self {
        OutputPort(Arc::new(Mutex::new(Box::new(writer))))
    }

    pub fn stdout() -> Self {
        OutputPort::new(io::stdout())
    }

    /// A port that captures everything written into an in-memory buffer.
    pub fn capture() -> (Self, CapturedOutput) {
        let buffer = CapturedOutput::default();
        (OutputPort::new(buffer.clone()), buffer)
    }

    pub fn write_str(&self, text: &str) {
        let mut w = self.0.lock().unwrap_or_else(|e| e.into_inner());
        // A closed pipe must not take the runner down.
        let _ = w.write_all(text.as_bytes());
        let _ = w.flush();
    }
}

impl fmt::Debug for OutputPort {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("OutputPort(..)")
    }
}

#[derive(Clone, Default)]
pub struct CapturedOutput(Arc<Mutex<Vec<u8>>>);

impl CapturedOutput {
    pub fn contents(&self) -> String {
        String::from_utf8_lossy(&self.0.lock().unwrap_or_else(|e| e.into_inner())).into_owned()
    }

    pub fn clear(&self) {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).clear();
    }
}

impl Write for CapturedOutput {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.0.lock().unwrap_or_else(|e| e.into_inner()).extend_from_slice(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

thread_local! {
    static PORTS: RefCell<Vec<OutputPort>> = const { RefCell::new(Vec::new()) };
}

static DEFAULT_PORT: std::sync::OnceLock<OutputPort> = std::sync::OnceLock::new();

pub fn current_output_port() -> OutputPort {
    PORTS
        .with(|ports| ports.borrow().last().cloned())
        .unwrap_or_else(|| DEFAULT_PORT.get_or_init(OutputPort::stdout).clone())
}

struct PortGuard;

impl Drop for PortGuard {
    fn drop(&mut self) {
        PORTS.with(|ports| {
            ports.borrow_mut().pop();
        });
    }
}

pub fn with_output_port<R>(port: OutputPort, f: impl FnOnce() -> R) -> R {
    PORTS.with(|ports| ports.borrow_mut().push(port));
    let _guard = PortGuard;
    f()
}

/// Write reporter text to the current output port.
pub fn report(text: &str) {
    current_output_port().write_str(text);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn port_is_dynamically_scoped() {
        let (outer, outer_buf) = OutputPort::capture();
        let (inner, inner_buf) = OutputPort::capture();
        with_output_port(outer, || {
            report("a");
            with_output_port(inner, || report("b"));
            report("c");
        });
        assert_eq!(outer_buf.contents(), "ac");
        assert_eq!(inner_buf.contents(), "b");
    }
}
