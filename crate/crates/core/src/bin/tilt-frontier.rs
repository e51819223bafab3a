fn main() -> std::process::ExitCode {
    tilt_frontier::cli::run(std::env::args_os())
}
