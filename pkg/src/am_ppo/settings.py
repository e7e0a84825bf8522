"""Project settings. See
https://docs.kedro.org/en/stable/kedro_project_setup/settings.html for the defaults.

``conf/base`` holds the desk profile; ``kedro run --env published`` switches to the profile
with the published hyperparameters.
"""

# Keyword arguments to pass to the `CONFIG_LOADER_CLASS` constructor.
CONFIG_LOADER_ARGS = {
    "base_env": "base",
    "default_run_env": "local",
}
