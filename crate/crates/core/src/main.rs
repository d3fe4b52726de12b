fn main() -> std::process::ExitCode {
    hyperproto::cli::main()
}
