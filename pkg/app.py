import streamlit as st

# Configure Streamlit page - MUST be first command
st.set_page_config(
    page_title="markerlens Comparison Dashboard",
    page_icon="🔍",
    layout="wide",
    initial_sidebar_state="expanded"
)

import io
import logging

import pandas as pd

from markerlens.analytics import dominant_outcome_grid, tally_crosstab
from markerlens.cli import reconcile_samples
from markerlens.exceptions import MarkerLensError
from markerlens.hypothesis import DEFAULT_LEVEL, run_comparison
from markerlens.markers import load_marker_file
from markerlens.regions import RegionKind, load_score_file
from markerlens.reporting import Report, ReportRenderer
from markerlens.simlab import SWEEP_COLUMNS
from markerlens.utils import read_table
from markerlens.voting import combined_coverage, majority_accuracy, majority_accuracy_hetero

logger = logging.getLogger(__name__)

renderer = ReportRenderer()


# Data processing functions
@st.cache_data
def load_inputs(score_bytes, score_name, marker_bytes, marker_name):
    """Load the uploaded score and marker files; returns (scores, markers, error)"""
    try:
        scores = load_score_file(io.BytesIO(score_bytes), name=score_name)
        markers = load_marker_file(io.BytesIO(marker_bytes), name=marker_name)
        return scores, markers, None
    except (MarkerLensError, UnicodeDecodeError) as e:
        return None, None, str(e)


@st.cache_data
def load_sweep(sweep_bytes, sweep_name):
    """Load a sweep CSV written by `markerlens simulate`"""
    try:
        df = read_table(io.BytesIO(sweep_bytes), SWEEP_COLUMNS, name=sweep_name)
        df = df.drop(columns=[c for c in df.columns if c.startswith("_")])
        for col in ("alpha", "beta"):
            df[col] = df[col].astype(float)
        for col in ("s_count", "f_count", "u_count"):
            df[col] = df[col].astype(int)
        return df, None
    except (MarkerLensError, ValueError) as e:
        return None, str(e)


def parse_ks(text):
    """Comma separated region sizes; returns (ks, error)"""
    try:
        ks = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        return None, f"Region sizes must be integers, got {text!r}"
    if not ks:
        return None, "Enter at least one region size"
    return ks, None


def show_compare_tab():
    st.subheader("Compare a test model against a reference model")

    with st.sidebar:
        st.header("📂 Data Upload")
        score_file = st.file_uploader("Scores (sample_id, score_ref, score_test)", type=["csv", "jsonl"])
        marker_file = st.file_uploader("Markers (sample_id, marker, verdict)", type=["csv", "jsonl"])

        st.header("⚙️ Settings")
        ks_text = st.text_input("Region size(s) k", value="1000")
        kinds = st.multiselect("Tests", [kind.label for kind in RegionKind], default=[kind.label for kind in RegionKind])
        level = st.number_input("Significance level", min_value=0.0001, max_value=0.5, value=DEFAULT_LEVEL, format="%.4f")
        unmatched = st.selectbox("Marker samples without scores", ["strict", "abstain"])

    if score_file is None or marker_file is None:
        st.info("Upload a scores file and a markers file to run the TopK, BottomK and Movers tests.")
        return

    scores, markers, error = load_inputs(score_file.getvalue(), score_file.name,
                                         marker_file.getvalue(), marker_file.name)
    if error:
        st.error(f"Error loading files: {error}")
        return

    ks, error = parse_ks(ks_text)
    if error:
        st.error(error)
        return

    try:
        reconciled, dropped = reconcile_samples(scores, markers, unmatched)
        results = run_comparison(scores, reconciled, ks, [RegionKind.parse(label) for label in kinds], level)
    except MarkerLensError as e:
        st.error(str(e))
        return

    report = Report(results, level=level)
    if dropped:
        st.warning(f"{len(dropped)} marker sample(s) had no scores and were dropped")

    st.success(f"Compared {len(scores)} samples over {len(reconciled.marker_names)} marker(s)")

    st.markdown("### Summary")
    summary = report.summary_frame()
    st.dataframe(summary, use_container_width=True, hide_index=True)

    st.markdown("### Per-marker details")
    for result in results:
        with st.expander(f"{result.kind.label} Test, k={result.k}: {result.verdict.value}"):
            detail = report.detail_frame()
            st.dataframe(detail[(detail["test"] == result.kind.label) & (detail["k"] == result.k)],
                         use_container_width=True, hide_index=True)

    col1, col2 = st.columns(2)
    with col1:
        st.download_button("Download CSV", renderer.render(report, "csv"), file_name="report.csv", mime="text/csv")
    with col2:
        st.download_button("Download JSON", renderer.render(report, "json"), file_name="report.json",
                           mime="application/json")


def show_voting_tab():
    st.subheader("Majority-vote calculator")

    col1, col2 = st.columns(2)
    with col1:
        k = st.number_input("Number of markers k", min_value=1, max_value=200, value=3, step=1, key="vote_k")
        alpha = st.slider("Marker accuracy α", min_value=0.0, max_value=1.0, value=0.6, step=0.01)
        outcome = majority_accuracy(int(k), alpha)
        st.metric("P(vote correct)", f"{outcome.p_correct:.6f}")
        st.caption(f"P(tie) = {outcome.p_tie:.6f}, P(vote wrong) = {outcome.p_wrong:.6f}")

    with col2:
        alphas_text = st.text_input("Individual accuracies (comma separated)", value="0.9,0.7,0.6")
        betas_text = st.text_input("Coverages (comma separated)", value="0.5,0.5")
        try:
            alphas = [float(v) for v in alphas_text.split(",") if v.strip()]
            betas = [float(v) for v in betas_text.split(",") if v.strip()]
            st.metric("P(vote correct), heterogeneous", f"{majority_accuracy_hetero(alphas).p_correct:.6f}")
            st.metric("Combined coverage", f"{combined_coverage(betas):.6f}")
        except (ValueError, MarkerLensError) as e:
            st.error(str(e))


def show_sweep_tab():
    st.subheader("Sweep viewer")
    sweep_file = st.file_uploader("Sweep CSV (from `markerlens simulate`)", type=["csv"], key="sweep")
    if sweep_file is None:
        st.info("Upload a sweep CSV to see outcome rates per (α, β) cell.")
        return

    df, error = load_sweep(sweep_file.getvalue(), sweep_file.name)
    if error:
        st.error(f"Error loading sweep: {error}")
        return

    if "variant" in df.columns:
        variant = st.selectbox("Study variant", list(dict.fromkeys(df["variant"])))
        df = df[df["variant"] == variant]

    test = st.selectbox("Test", [kind.label for kind in RegionKind])
    try:
        st.markdown("**Dominant outcome** (rows α, columns β)")
        st.dataframe(dominant_outcome_grid(df, test), use_container_width=True)
        value = st.radio("Rate", ["s_rate", "f_rate", "u_rate"], horizontal=True)
        st.dataframe(tally_crosstab(df, test, value), use_container_width=True)
    except MarkerLensError as e:
        st.error(str(e))


def main():
    st.title("🔍 markerlens")
    st.caption("Label-free comparison of two models with weak-signal markers")

    tab1, tab2, tab3 = st.tabs(["Compare", "Voting calculator", "Sweep viewer"])

    with tab1:
        show_compare_tab()

    with tab2:
        show_voting_tab()

    with tab3:
        show_sweep_tab()


if __name__ == "__main__":
    main()
