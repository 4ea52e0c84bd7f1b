# Marker file so tooling treats `services` as a regular package.
