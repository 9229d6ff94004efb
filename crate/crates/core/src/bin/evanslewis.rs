fn main() -> std::process::ExitCode {
    evanslewis::cli::main()
}
