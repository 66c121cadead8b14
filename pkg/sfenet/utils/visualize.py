import matplotlib

matplotlib.use('Agg')

import matplotlib.pyplot as plt
import seaborn as sns


def plot_roc(report, path, title='held-out frames'):
    roc = report.roc_frame()
    fig, ax = plt.subplots(figsize=(4, 4))
    ax.plot(roc['fpr'], roc['tpr'], drawstyle='steps-post', label='AUC %.3f' % report.frame_auc)
    ax.plot([0, 1], [0, 1], color='gray', linestyle='--', linewidth=0.8)
    ax.scatter([report.eer], [1 - report.eer], color='red', zorder=3, label='EER %.3f' % report.eer)
    ax.set_xlabel('false positive rate')
    ax.set_ylabel('true positive rate')
    ax.set_title(title)
    ax.legend(loc='lower right')
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_gates(summary, path):
    """Bar plot of `gate_summary` output: mean gate weight per stream and family."""
    long = summary.melt(id_vars='family', var_name='stream', value_name='gate')
    fig, ax = plt.subplots(figsize=(7, 4))
    sns.barplot(data=long, x='family', y='gate', hue='stream', ax=ax)
    ax.axhline(1.0 / (len(summary.columns) - 1), color='gray', linestyle='--', linewidth=0.8)
    ax.set_ylabel('mean gate weight')
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_feature_maps(frame, maps, path, title=None):
    fig, axes = plt.subplots(1, len(maps) + 1, figsize=(3 * (len(maps) + 1), 3))
    axes[0].imshow(frame.squeeze(), cmap='gray' if frame.shape[-1] == 1 else None, vmin=0, vmax=1)
    axes[0].set_title('frame')
    for ax, (name, m) in zip(axes[1:], sorted(maps.items())):
        ax.imshow(m, cmap='magma')
        ax.set_title(name)
    for ax in axes:
        ax.axis('off')
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
