# CSV columns, in file order
METRICS_COLUMNS = [
    "round",
    "global_loss",
    "global_accuracy",
    "round_virtual_time_s",
    "round_energy_j",
    "cum_virtual_time_s",
    "cum_energy_j",
    "participants",
]

PARTICIPANT_SEPARATOR = ";"

METRICS_FILE_NAME = "metrics.csv"
PARAMETERS_FILE_NAME = "final_parameters.bin"
METADATA_SUFFIX = ".meta.json"

# Labels used by the rich tables
METRICS_DISPLAY_NAMES = {
    "round": "Tour",
    "global_loss": "Perte",
    "global_accuracy": "Précision",
    "round_virtual_time_s": "Temps tour (s)",
    "round_energy_j": "Énergie tour (J)",
    "cum_virtual_time_s": "Temps cumulé (s)",
    "cum_energy_j": "Énergie cumulée (J)",
    "participants": "Clients",
}
