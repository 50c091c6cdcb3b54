fn main() -> std::process::ExitCode {
    sincfuse::cli::main()
}
