import logging
import os

import plotly.express as px
import plotly.graph_objects as go

logging.basicConfig(level=logging.INFO, format='%(asctime)s - %(name)s - %(levelname)s - %(message)s')
logger = logging.getLogger("Charts")

METRIC_LABELS = {
    "i_auroc": "I-AUROC",
    "p_auroc": "P-AUROC",
    "p_aupro": "P-AUPRO",
}


def create_condition_comparison_chart(df, metric="p_aupro"):
    """
    Create a grouped bar chart of one metric per run across test conditions.

    Args:
        df (DataFrame): Report rows with run, condition and metric columns
        metric (str): Metric column to plot

    Returns:
        Figure: Plotly figure object
    """
    label = METRIC_LABELS.get(metric, metric)
    fig = px.bar(
        df,
        x='condition',
        y=metric,
        color='run',
        barmode='group',
        title=f'{label}: In-Distribution vs Corrupted Test Sets',
        labels={'condition': 'Test Condition', metric: label, 'run': 'Run'},
    )

    fig.update_traces(
        hovertemplate='Condition: %{x}<br>' + label + ': %{y:.4f}<extra></extra>'
    )

    fig.update_layout(
        xaxis_title="Test Condition",
        yaxis_title=label,
        yaxis_range=[0, 1],
        legend_title="Run",
    )

    return fig


def create_ablation_chart(df):
    """
    Create a chart comparing ID and mean-OOD P-AUPRO per ablation preset.

    Args:
        df (DataFrame): Ablation table with run, id and mean_ood columns

    Returns:
        Figure: Plotly figure object
    """
    fig = go.Figure()
    fig.add_trace(go.Bar(x=df['run'], y=df['id'], name='ID'))
    fig.add_trace(go.Bar(x=df['run'], y=df['mean_ood'], name='Mean OOD'))

    fig.update_layout(
        title='Component Ablation (P-AUPRO)',
        xaxis_title="Preset",
        yaxis_title="P-AUPRO",
        barmode='group',
        yaxis_range=[0, 1],
    )

    return fig


def create_training_curve_chart(df):
    """
    Create a line chart of the epoch-mean loss terms.

    Args:
        df (DataFrame): Training history with epoch and l_* columns

    Returns:
        Figure: Plotly figure object
    """
    loss_columns = [c for c in ('l_total', 'l_kd', 'l_ce', 'l_cs') if c in df.columns]
    long_df = df.melt(id_vars='epoch', value_vars=loss_columns, var_name='term', value_name='loss')

    fig = px.line(
        long_df,
        x='epoch',
        y='loss',
        color='term',
        title='Training Loss',
        labels={'epoch': 'Epoch', 'loss': 'Loss', 'term': 'Term'},
        markers=True,
    )

    fig.update_layout(hovermode="x unified")

    return fig


def create_class_metric_chart(per_class, condition=None):
    """
    Create a grouped bar chart of the metrics of every class.

    Args:
        per_class (DataFrame): Per-class report table
        condition (str, optional): Condition name for the title

    Returns:
        Figure: Plotly figure object
    """
    metrics = [m for m in METRIC_LABELS if m in per_class.columns]
    long_df = per_class.melt(id_vars='class_name', value_vars=metrics, var_name='metric', value_name='value')
    long_df['metric'] = long_df['metric'].map(METRIC_LABELS)

    title = 'Per-Class Metrics' if condition is None else f'Per-Class Metrics ({condition})'
    fig = px.bar(
        long_df,
        x='class_name',
        y='value',
        color='metric',
        barmode='group',
        title=title,
        labels={'class_name': 'Class', 'value': 'Score', 'metric': 'Metric'},
    )
    fig.update_layout(yaxis_range=[0, 1])

    return fig


def save_figure(fig, path):
    """
    Write a figure as HTML and, when an image export backend is available, PNG.

    Args:
        fig (Figure): Plotly figure
        path (str): Output path without extension

    Returns:
        list: Written files
    """
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    written = [f"{path}.html"]
    fig.write_html(written[0])
    try:
        fig.write_image(f"{path}.png")
        written.append(f"{path}.png")
    except Exception as e:
        logger.warning(f"PNG export skipped for {path}: {str(e)}")
    return written
