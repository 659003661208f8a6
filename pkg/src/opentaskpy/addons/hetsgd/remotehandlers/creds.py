"""Credentials and client construction for the S3 artifact store."""

import os
from dataclasses import dataclass
from time import time
from typing import Any

import boto3
import opentaskpy.otflogging
from botocore.config import Config

logger = opentaskpy.otflogging.init_logging(__name__, None, None)

ROLE_SESSION_SECONDS = 900


@dataclass(frozen=True)
class S3Credentials:
    """Where the S3 client gets its identity from.

    Any field left unset in the ``protocol`` block falls back to the standard
    AWS environment variable. With no keys at all boto3 uses its own chain
    (instance profile, config files).
    """

    access_key_id: str | None = None
    secret_access_key: str | None = None
    assume_role_arn: str | None = None
    region_name: str | None = None
    read_timeout: int | None = None

    @classmethod
    def from_protocol(cls, protocol: dict[str, Any] | None) -> "S3Credentials":
        """Build from an execution's ``protocol`` block."""
        protocol = protocol or {}
        return cls(
            access_key_id=protocol.get("access_key_id", os.environ.get("AWS_ACCESS_KEY_ID")),
            secret_access_key=protocol.get(
                "secret_access_key", os.environ.get("AWS_SECRET_ACCESS_KEY")
            ),
            assume_role_arn=protocol.get("assume_role_arn", os.environ.get("AWS_ROLE_ARN")),
            region_name=protocol.get("region_name", os.environ.get("AWS_REGION")),
            read_timeout=protocol.get("botocoreReadTimeout"),
        )

    def as_dict(self) -> dict[str, str | None]:
        """The static key pair in the shape STS returns, plus the region."""
        return {
            "AccessKeyId": self.access_key_id,
            "SecretAccessKey": self.secret_access_key,
            "region_name": self.region_name,
        }


def _endpoint_kwargs() -> dict[str, str]:
    endpoint = os.environ.get("AWS_ENDPOINT_URL")
    return {"endpoint_url": endpoint} if endpoint else {}


def assume_role(role_arn: str) -> dict[str, Any]:
    """Assume ``role_arn`` and return the temporary credentials, ``Expiration`` included."""
    logger.info(f"Assuming role: {role_arn}")
    sts_client = boto3.client("sts", **_endpoint_kwargs())
    response = sts_client.assume_role(
        RoleArn=role_arn,
        RoleSessionName=f"HETSGD{time()}",
        DurationSeconds=ROLE_SESSION_SECONDS,
    )
    temporary: dict[str, Any] = response["Credentials"]
    logger.info(f"Assumed role access key id: {temporary['AccessKeyId']}")
    return temporary


def build_s3_client(credentials: S3Credentials) -> tuple[Any, dict[str, Any] | None]:
    """Create an S3 client.

    Args:
        credentials: Keys, role and region to use

    Returns:
        tuple: The client, and the temporary credentials when a role was assumed
    """
    temporary = assume_role(credentials.assume_role_arn) if credentials.assume_role_arn else None
    keys: dict[str, Any] = temporary or credentials.as_dict()

    session_kwargs = {
        "aws_access_key_id": keys["AccessKeyId"],
        "aws_secret_access_key": keys["SecretAccessKey"],
    }
    if "SessionToken" in keys:
        session_kwargs["aws_session_token"] = keys["SessionToken"]
    if credentials.region_name:
        session_kwargs["region_name"] = credentials.region_name

    config = Config(read_timeout=credentials.read_timeout) if credentials.read_timeout else None
    session = boto3.session.Session(**session_kwargs)
    return session.client("s3", config=config, **_endpoint_kwargs()), temporary
