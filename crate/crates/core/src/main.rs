fn main() -> std::process::ExitCode {
    probespec::cli::main()
}
