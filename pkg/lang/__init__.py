"""Source language: grammar, AST, parser, resolver and pretty-printer."""
