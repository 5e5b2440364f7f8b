fn main() -> std::process::ExitCode {
    camnet::cli::main_with(std::env::args_os())
}
