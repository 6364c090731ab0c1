"""Periodic Sturm–Liouville spectra through the Prüfer rotation number."""
