"""alertlab: design-time experiments for threshold alerting rules."""
