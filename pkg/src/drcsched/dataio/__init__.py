from .fileformat import (
    InstanceFormatError,
    atomic_write,
    dumps_genome,
    dumps_instance,
    genome_from_dict,
    genome_to_dict,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    loads_genome,
    loads_instance,
    save_instance,
)
from .generator import PRESETS, GeneratorConfig, config_from_dict, generate_instance, preset
from .export import CSV_HEADER, FORMATS, ScheduleFormatError, export_schedule, schedule_from_csv, schedule_to_csv, schedule_to_gantt
from .milp import MilpModel, ModelTooLarge, big_m, export_milp
from .report import BenchmarkReport, ResultRecord, build_report, record_from, sample_std
