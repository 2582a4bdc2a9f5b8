"""Filesystem paths common to multiple modules."""

import platformdirs

app_dir = platformdirs.user_config_path("specular-diffusion")
user_config_file = app_dir / "config.toml"
runs_dir = platformdirs.user_data_path("specular-diffusion") / "runs"
