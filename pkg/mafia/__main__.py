from dotenv import load_dotenv
load_dotenv(override=True)

from mafia.cli import main  # noqa: E402

main()
