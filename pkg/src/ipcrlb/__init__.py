# ipcrlb: information-reduction bounds and receiver control for bistatic passive radar
