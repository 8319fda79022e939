"""Tool objects behind the CLI subcommands."""
