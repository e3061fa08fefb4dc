from .base import AggregateWorkload, Workload
from .matvec import MatVecJob, MatVecWorkload, matvec_camr, matvec_uncoded
from .sort import SortWorkload, generate_records
from .wordcount import MultiWordCount, WordCountWorkload, generate_text

__all__ = [
    "AggregateWorkload", "Workload", "MatVecJob", "MatVecWorkload", "matvec_camr",
    "matvec_uncoded", "SortWorkload", "generate_records", "MultiWordCount", "WordCountWorkload",
    "generate_text",
]
