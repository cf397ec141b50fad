"""Preliminary tests: panel unit roots, cointegration rank, lag order, residual autocorrelation."""

from .johansen import JohansenResult, johansen_test
from .lagorder import CRITERIA, LagSelectionReport, lag_criteria, select_lag_length
from .portmanteau import format_q, ljung_box, ljung_box_equations
from .report import TestReport, format_p, reports_to_text
from .unitroot import (adf_fisher_test, adf_pvalue, adf_statistic, contiguous_series,
                       llc_test, pooled_lag)

__all__ = ["JohansenResult", "johansen_test", "CRITERIA", "LagSelectionReport",
           "lag_criteria", "select_lag_length", "format_q", "ljung_box",
           "ljung_box_equations", "TestReport", "format_p", "reports_to_text",
           "adf_fisher_test", "adf_pvalue", "adf_statistic", "contiguous_series", "llc_test",
           "pooled_lag"]
