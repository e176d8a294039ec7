"""Frame recovery for lossy video streaming."""
