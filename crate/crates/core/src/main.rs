fn main() -> std::process::ExitCode {
    ghzsim::cli::main()
}
