//! The `tracelinks` executable.

/// Normalizing the standard library analyses recurses deeply on large
/// terms, so commands run on a thread with a generous stack.
const STACK_SIZE: usize = 512 << 20;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let code = std::thread::Builder::new()
        .stack_size(STACK_SIZE)
        .spawn(move || {
            let stdout = std::io::stdout();
            let stderr = std::io::stderr();
            tracelinks::cli::run(args, &mut stdout.lock(), &mut stderr.lock())
        })
        .expect("spawn the main thread")
        .join()
        .unwrap_or(2);
    std::process::exit(code);
}
