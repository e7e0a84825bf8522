"""Command line surface: ``am-ppo train | eval | replay-controller``."""
