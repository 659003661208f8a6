"""Simulation remote handler: runs an experiment sweep as an OTF execution."""

import json
import threading

import opentaskpy.otflogging
from opentaskpy.exceptions import InvalidConfigError
from opentaskpy.remotehandlers.remotehandler import RemoteExecutionHandler

from ..exceptions import HetSGDError, SweepCancelledError
from ..harness.config import ExperimentConfig, parse_config
from ..harness.report import emit_report
from ..harness.storage import ArtifactStore, join_location
from ..harness.sweep import sweep


class SimulationExecution(RemoteExecutionHandler):
    """Runs an experiment sweep and writes ``sweep.csv`` and ``report.json``."""

    TASK_TYPE = "E"

    def __init__(self, spec: dict):
        """Initialise the SimulationExecution handler.

        Args:
            spec (dict): The spec for the execution.
        """
        self.logger = opentaskpy.otflogging.init_logging(
            __name__, spec["task_id"], self.TASK_TYPE
        )

        super().__init__(spec)

        if "experiment" not in self.spec and "experimentFile" not in self.spec:
            raise InvalidConfigError("one of experiment or experimentFile must be defined in spec")
        if "outputDirectory" not in self.spec:
            raise InvalidConfigError("outputDirectory not defined in spec")

        self.store = ArtifactStore(self.spec.get("protocol"))
        self.cancel_event = threading.Event()

    def tidy(self) -> None:
        """Release the S3 client."""
        self.store.close()

    def kill(self) -> None:
        """Ask the running sweep to stop before its next cell."""
        self.cancel_event.set()
        self.logger.info("Cancellation requested")

    def _experiment(self) -> ExperimentConfig:
        if "experiment" in self.spec:
            document = self.spec["experiment"]
        else:
            document = json.loads(self.store.read_text(self.spec["experimentFile"]))
        return parse_config(document)

    def execute(self) -> bool:
        """Run the sweep and write its outputs.

        Returns:
            bool: True if every cell ran and the outputs were written
        """
        output_directory = self.spec["outputDirectory"]
        try:
            config = self._experiment()
            threads = self.spec.get("threads", config.threads)
            self.logger.info(f"Running experiment '{config.name}' with {threads} thread(s)")
            result = sweep(config, threads=threads, cancel=self.cancel_event, store=self.store)
            report = emit_report(result.rows, self.spec.get("bounds", []))

            self.store.write_text(join_location(output_directory, "sweep.csv"), result.to_csv())
            self.store.write_text(join_location(output_directory, "report.json"), report.to_json())
            self.logger.info(
                f"Wrote {len(result.rows)} rows and the report to {output_directory}"
            )
        except SweepCancelledError as ex:
            self.logger.error(f"Simulation cancelled: {ex}")
            return False
        except (InvalidConfigError, json.JSONDecodeError) as ex:
            self.logger.error(f"Invalid experiment: {ex}")
            return False
        except (HetSGDError, ValueError, ArithmeticError) as ex:
            self.logger.error(f"Simulation failed: {type(ex).__name__}: {ex}")
            return False
        finally:
            self.tidy()

        return True
