"""am-ppo
"""

__version__ = "0.1.0"
